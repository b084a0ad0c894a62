//! In-memory state folded from the event log.

use std::collections::{BTreeMap, BTreeSet};

use acgrade_core::sheet::{route_batch, RoutedPage, RoutingConfig, RoutingResult, ScanBatch, ScanPage};
use acgrade_core::{Assignment, BookletId, Comment, Exam, GraderId, TaskId};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventRecord};
use crate::lifecycle::ExamState;

pub type SubmissionKey = (BookletId, TaskId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: ExamState,
    pub to: ExamState,
    pub actor: GraderId,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Projection {
    pub exam: Option<Exam>,
    pub state: ExamState,
    pub transitions: Vec<Transition>,
    /// Every scan ever ingested, in arrival order.
    pub scans: Vec<ScanPage>,
    /// Routing of all scans together, so duplicates across batches show up.
    pub routing: RoutingResult,
    pub assignments: BTreeMap<SubmissionKey, Assignment>,
    pub comments: BTreeMap<SubmissionKey, Vec<Comment>>,
    pub last_seq: u64,
    /// Booklets expected to exist; `None` accepts any.
    registry: Option<BTreeSet<BookletId>>,
}

impl Projection {
    pub fn new(registry: Option<BTreeSet<BookletId>>) -> Self {
        Projection { registry, ..Default::default() }
    }

    pub fn replay<'a>(registry: Option<BTreeSet<BookletId>>, records: impl IntoIterator<Item = &'a EventRecord>) -> Self {
        let mut projection = Projection::new(registry);
        for record in records {
            projection.apply(record);
        }
        projection
    }

    /// Applies an already validated event.
    pub fn apply(&mut self, record: &EventRecord) {
        match &record.event {
            Event::ExamUploaded { exam } => {
                self.exam = Some((**exam).clone());
                self.reroute();
            }
            Event::StateChanged { from, to } => {
                self.transitions.push(Transition { from: *from, to: *to, actor: record.actor.clone(), at: record.timestamp });
                self.state = *to;
            }
            Event::BatchIngested { pages } => {
                self.scans.extend(pages.iter().cloned());
                self.reroute();
            }
            Event::AssignmentRecorded { assignment } => {
                self.assignments
                    .insert((assignment.booklet_id.clone(), assignment.task_id.clone()), assignment.clone());
            }
            Event::CommentAdded { booklet_id, task_id, comment } => {
                self.comments.entry((booklet_id.clone(), task_id.clone())).or_default().push(comment.clone());
            }
        }
        self.last_seq = record.seq;
    }

    fn reroute(&mut self) {
        let Some(exam) = &self.exam else {
            return;
        };
        let config = RoutingConfig { exam_id: exam.exam_id.clone(), pages_per_booklet: exam.page_count() };
        let batch = ScanBatch::new(self.scans.clone(), DateTime::UNIX_EPOCH).expect("scans were validated on ingest");
        self.routing = route_batch(&batch, &config, self.registry.as_ref());
    }

    pub fn routing_config(&self) -> Option<RoutingConfig> {
        self.exam
            .as_ref()
            .map(|exam| RoutingConfig { exam_id: exam.exam_id.clone(), pages_per_booklet: exam.page_count() })
    }

    pub fn registry(&self) -> Option<&BTreeSet<BookletId>> {
        self.registry.as_ref()
    }

    /// Booklets with at least one routed page or assignment.
    pub fn booklets(&self) -> BTreeSet<BookletId> {
        self.routing.booklets.keys().cloned().chain(self.assignments.keys().map(|(b, _)| b.clone())).collect()
    }

    pub fn pages(&self, booklet: &BookletId) -> &[RoutedPage] {
        self.routing.booklets.get(booklet).map_or(&[], Vec::as_slice)
    }

    /// Assignment with its comments attached.
    pub fn assignment(&self, key: &SubmissionKey) -> Option<Assignment> {
        let mut a = self.assignments.get(key)?.clone();
        a.comments = self.comments.get(key).cloned().unwrap_or_default();
        Some(a)
    }

    pub fn all_assignments(&self) -> Vec<Assignment> {
        self.assignments.keys().filter_map(|k| self.assignment(k)).collect()
    }

    pub fn version(&self, key: &SubmissionKey) -> u64 {
        self.assignments.get(key).map_or(0, |a| a.version)
    }
}
