//! Grading workflow operations over the event log and projection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use acgrade_core::ac::record_assignment;
use acgrade_core::analytics::{ac_histogram, cohort_report, CohortReport};
use acgrade_core::scoring::{grade_booklet, GradeReport};
use acgrade_core::sheet::{RoutingResult, ScanBatch, ScanPage};
use acgrade_core::{AcId, Assignment, AssignmentStatus, BookletId, Comment, Exam, GraderId, TaskId, Visibility};
use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::config::Actor;
use crate::error::ServiceError;
use crate::events::{Event, EventLog};
use crate::export::{self, Registry};
use crate::lifecycle::ExamState;
use crate::projection::{Projection, SubmissionKey, Transition};

pub struct ServiceOptions {
    pub lease: Duration,
    pub registry: Option<Registry>,
    pub clock: Arc<dyn Clock>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions { lease: Duration::minutes(10), registry: None, clock: Arc::new(SystemClock) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassView {
    pub id: AcId,
    pub description: String,
}

/// A submission handed to one grader until `lease_expiry`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub booklet_id: BookletId,
    pub task_id: TaskId,
    pub grader_id: GraderId,
    /// Scans of the pages holding the task, or of the whole booklet when the
    /// exam has no layout.
    pub image_refs: Vec<String>,
    pub acs: Vec<ClassView>,
    /// Version to pass back as `expected_version`; 0 when nothing is recorded.
    pub version: u64,
    /// Work saved so far, if any.
    pub current: Option<Assignment>,
    pub lease_expiry: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub booklet_id: BookletId,
    pub task_id: TaskId,
    pub ac_ids: BTreeSet<AcId>,
    #[serde(default)]
    pub transcription: Option<String>,
    #[serde(default)]
    pub finalize: bool,
    #[serde(default)]
    pub expected_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRequest {
    pub booklet_id: BookletId,
    pub task_id: TaskId,
    pub text: String,
    #[serde(default = "default_visibility")]
    pub visibility: Visibility,
}

fn default_visibility() -> Visibility {
    Visibility::Examinee
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub task_id: TaskId,
    pub finalized: usize,
    pub in_progress: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamStatus {
    pub exam_id: String,
    pub title: String,
    pub state: ExamState,
    /// Booklets with routed scans or recorded work.
    pub booklets: Vec<BookletId>,
    pub scanned_pages: usize,
    pub anomalies: usize,
    pub tasks: Vec<TaskProgress>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone)]
struct Lease {
    grader: GraderId,
    expiry: DateTime<Utc>,
}

struct Inner {
    projection: Projection,
    log: EventLog,
    claims: HashMap<SubmissionKey, Lease>,
}

impl Inner {
    fn exam(&self) -> Result<&Exam, ServiceError> {
        self.projection.exam.as_ref().ok_or(ServiceError::NoExam)
    }

    fn require_state(&self, operation: &'static str, allowed: &[ExamState]) -> Result<&Exam, ServiceError> {
        let exam = self.exam()?;
        let state = self.projection.state;
        if allowed.contains(&state) {
            Ok(exam)
        } else {
            Err(ServiceError::WrongState { operation, state })
        }
    }

    fn append(&mut self, now: DateTime<Utc>, actor: &GraderId, event: Event) -> Result<(), ServiceError> {
        let record = self.log.append(now, actor, event)?;
        self.projection.apply(&record);
        Ok(())
    }

    fn live_claim(&self, key: &SubmissionKey, now: DateTime<Utc>) -> Option<&Lease> {
        self.claims.get(key).filter(|lease| lease.expiry > now)
    }

    fn known_booklet(&self, booklet: &BookletId) -> bool {
        self.projection.routing.booklets.contains_key(booklet)
            || self.projection.registry().is_some_and(|r| r.contains(booklet))
    }
}

/// Thread-safe handle to one exam's grading state.
///
/// Every operation runs under a single lock, so writes are serialized and
/// reads see the state after the last completed write.
pub struct GradingService {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    lease: Duration,
    registry: Option<Registry>,
}

const RECORDING_STATES: [ExamState; 1] = [ExamState::Grading];
const COMMENT_STATES: [ExamState; 2] = [ExamState::Grading, ExamState::Analysis];
const INGEST_STATES: [ExamState; 2] = [ExamState::AcReview, ExamState::Grading];
const GRADE_EXPORT_STATES: [ExamState; 3] = [ExamState::Analysis, ExamState::FeedbackReady, ExamState::Archived];
const FEEDBACK_STATES: [ExamState; 2] = [ExamState::FeedbackReady, ExamState::Archived];

impl GradingService {
    /// Opens the data directory and replays its event log.
    pub fn open(data_dir: &Path, options: ServiceOptions) -> Result<Self, ServiceError> {
        let (log, records) = EventLog::open(data_dir)?;
        let keys = options.registry.as_ref().map(|r| r.keys().cloned().collect());
        let projection = Projection::replay(keys, &records);
        Ok(GradingService {
            inner: Mutex::new(Inner { projection, log, claims: HashMap::new() }),
            clock: options.clock,
            lease: options.lease,
            registry: options.registry,
        })
    }

    /// Copy of the current projection.
    pub fn snapshot(&self) -> Projection {
        self.inner.lock().projection.clone()
    }

    pub fn state(&self) -> ExamState {
        self.inner.lock().projection.state
    }

    pub fn exam(&self) -> Option<Exam> {
        self.inner.lock().projection.exam.clone()
    }

    pub fn status(&self) -> Result<ExamStatus, ServiceError> {
        let inner = self.inner.lock();
        let exam = inner.exam()?;
        let p = &inner.projection;
        let tasks = exam
            .tasks()
            .map(|task| {
                let of_task = p.assignments.values().filter(|a| a.task_id == task.id);
                let finalized = of_task.clone().filter(|a| a.is_finalized()).count();
                TaskProgress { task_id: task.id.clone(), finalized, in_progress: of_task.count() - finalized }
            })
            .collect();
        Ok(ExamStatus {
            exam_id: exam.exam_id.clone(),
            title: exam.title.clone(),
            state: p.state,
            booklets: p.booklets().into_iter().collect(),
            scanned_pages: p.scans.len(),
            anomalies: p.routing.anomalies.len(),
            tasks,
            transitions: p.transitions.clone(),
        })
    }

    /// Parses and stores an exam. A replacement keeps the exam id and is
    /// only accepted before grading starts.
    pub fn upload_exam(&self, actor: &Actor, json: &str) -> Result<Exam, ServiceError> {
        require_lead(actor, "uploading an exam")?;
        let exam = Exam::from_json(json)?;
        let mut inner = self.inner.lock();
        if let Some(current) = &inner.projection.exam {
            let state = inner.projection.state;
            if !matches!(state, ExamState::Draft | ExamState::AcReview) {
                return Err(ServiceError::WrongState { operation: "uploading an exam", state });
            }
            if current.exam_id != exam.exam_id {
                return Err(ServiceError::Invalid(format!(
                    "this service hosts exam {}; cannot replace it with {}",
                    current.exam_id, exam.exam_id
                )));
            }
        }
        let now = self.clock.now();
        inner.append(now, &actor.grader_id, Event::ExamUploaded { exam: Box::new(exam.clone()) })?;
        Ok(exam)
    }

    pub fn transition(&self, actor: &Actor, to: ExamState) -> Result<ExamState, ServiceError> {
        require_lead(actor, "changing the exam state")?;
        let mut inner = self.inner.lock();
        inner.exam()?;
        let from = inner.projection.state;
        if !from.can_become(to) {
            return Err(ServiceError::BadTransition { from, to });
        }
        let now = self.clock.now();
        inner.append(now, &actor.grader_id, Event::StateChanged { from, to })?;
        if from == ExamState::Grading {
            inner.claims.clear();
        }
        Ok(to)
    }

    /// Stores a scan batch and returns the routing of all scans so far, so
    /// duplicates across batches and pages still missing are visible.
    pub fn ingest_batch(&self, actor: &Actor, pages: Vec<ScanPage>) -> Result<RoutingResult, ServiceError> {
        let now = self.clock.now();
        let batch = ScanBatch::new(pages, now).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let mut inner = self.inner.lock();
        inner.require_state("ingesting scans", &INGEST_STATES)?;
        inner.append(now, &actor.grader_id, Event::BatchIngested { pages: batch.pages().to_vec() })?;
        Ok(inner.projection.routing.clone())
    }

    /// Hands out the first booklet (by id) whose answer to `task` is neither
    /// finalized nor claimed by someone else. A grader asking again gets
    /// their own open claim back with a renewed lease.
    pub fn claim_next(&self, actor: &Actor, task_id: &TaskId) -> Result<Claim, ServiceError> {
        let mut inner = self.inner.lock();
        let exam = inner.require_state("claiming work", &RECORDING_STATES)?;
        if exam.task(task_id).is_none() {
            return Err(ServiceError::NotFound(format!("task {task_id}")));
        }
        let now = self.clock.now();
        let open = |inner: &Inner, booklet: &BookletId| {
            let key = (booklet.clone(), task_id.clone());
            !inner.projection.assignments.get(&key).is_some_and(Assignment::is_finalized)
        };
        let own = inner
            .claims
            .iter()
            .filter(|(key, lease)| {
                &key.1 == task_id && lease.grader == actor.grader_id && lease.expiry > now && open(&inner, &key.0)
            })
            .map(|(key, _)| key.0.clone())
            .min();
        let booklet = match own {
            Some(b) => b,
            None => inner
                .projection
                .routing
                .booklets
                .keys()
                .find(|b| open(&inner, b) && inner.live_claim(&((*b).clone(), task_id.clone()), now).is_none())
                .cloned()
                .ok_or_else(|| ServiceError::NoWork(task_id.to_string()))?,
        };
        let key = (booklet, task_id.clone());
        let expiry = now + self.lease;
        inner.claims.insert(key.clone(), Lease { grader: actor.grader_id.clone(), expiry });
        Ok(build_claim(&inner, key, actor.grader_id.clone(), expiry))
    }

    /// Records an assignment. The caller must hold the claim or state the
    /// version it is overwriting.
    pub fn submit_assignment(&self, actor: &Actor, request: SubmitRequest) -> Result<Assignment, ServiceError> {
        let mut inner = self.inner.lock();
        let exam = inner.require_state("recording assignments", &RECORDING_STATES)?;
        let task = exam
            .task(&request.task_id)
            .ok_or_else(|| ServiceError::NotFound(format!("task {}", request.task_id)))?
            .clone();
        if !inner.known_booklet(&request.booklet_id) {
            return Err(ServiceError::NotFound(format!("booklet {}", request.booklet_id)));
        }
        let now = self.clock.now();
        let key = (request.booklet_id.clone(), request.task_id.clone());
        let holds_claim = match inner.live_claim(&key, now) {
            Some(lease) if lease.grader != actor.grader_id => {
                return Err(ServiceError::ClaimHeldByOther(lease.grader.to_string()));
            }
            Some(_) => true,
            None => false,
        };
        let current = inner.projection.version(&key);
        match request.expected_version {
            Some(expected) if expected != current => {
                return Err(ServiceError::VersionConflict { expected, current });
            }
            None if !holds_claim => return Err(ServiceError::NotClaimed),
            _ => {}
        }
        let assignment = Assignment {
            booklet_id: request.booklet_id,
            task_id: request.task_id,
            ac_ids: request.ac_ids,
            transcription: request.transcription,
            grader_id: actor.grader_id.clone(),
            version: 0,
            comments: Vec::new(),
            status: if request.finalize { AssignmentStatus::Finalized } else { AssignmentStatus::InProgress },
        };
        let recorded = record_assignment(assignment, &task, inner.projection.assignments.get(&key))?;
        inner.append(now, &actor.grader_id, Event::AssignmentRecorded { assignment: recorded.clone() })?;
        if recorded.is_finalized() {
            inner.claims.remove(&key);
        } else if holds_claim {
            inner.claims.insert(key, Lease { grader: actor.grader_id.clone(), expiry: now + self.lease });
        }
        Ok(recorded)
    }

    pub fn assignment(&self, booklet: &BookletId, task: &TaskId) -> Result<Assignment, ServiceError> {
        let inner = self.inner.lock();
        inner.exam()?;
        inner
            .projection
            .assignment(&(booklet.clone(), task.clone()))
            .ok_or_else(|| ServiceError::NotFound(format!("assignment {booklet}/{task}")))
    }

    pub fn add_comment(&self, actor: &Actor, request: CommentRequest) -> Result<Comment, ServiceError> {
        let mut inner = self.inner.lock();
        let exam = inner.require_state("commenting", &COMMENT_STATES)?;
        if exam.task(&request.task_id).is_none() {
            return Err(ServiceError::NotFound(format!("task {}", request.task_id)));
        }
        if !inner.known_booklet(&request.booklet_id) {
            return Err(ServiceError::NotFound(format!("booklet {}", request.booklet_id)));
        }
        if request.text.trim().is_empty() {
            return Err(ServiceError::Invalid("comment text is empty".into()));
        }
        let comment = Comment {
            author: actor.grader_id.clone(),
            text: request.text,
            visibility: request.visibility,
            timestamp: self.clock.now(),
        };
        let event =
            Event::CommentAdded { booklet_id: request.booklet_id, task_id: request.task_id, comment: comment.clone() };
        inner.append(comment.timestamp, &actor.grader_id, event)?;
        Ok(comment)
    }

    pub fn histogram(&self, task: &TaskId) -> Result<BTreeMap<AcId, usize>, ServiceError> {
        let snapshot = self.snapshot();
        let exam = snapshot.exam.as_ref().ok_or(ServiceError::NoExam)?;
        if exam.task(task).is_none() {
            return Err(ServiceError::NotFound(format!("task {task}")));
        }
        let assignments: Vec<Assignment> = snapshot.assignments.values().cloned().collect();
        Ok(ac_histogram(task, &assignments))
    }

    pub fn cohort(&self) -> Result<CohortReport, ServiceError> {
        let snapshot = self.snapshot();
        let exam = snapshot.exam.as_ref().ok_or(ServiceError::NoExam)?;
        let assignments = snapshot.all_assignments();
        Ok(cohort_report(exam, &assignments, &reports(&snapshot, exam, &assignments)))
    }

    pub fn grade_reports(&self) -> Result<Vec<GradeReport>, ServiceError> {
        let snapshot = self.snapshot();
        let exam = snapshot.exam.as_ref().ok_or(ServiceError::NoExam)?;
        Ok(reports(&snapshot, exam, &snapshot.all_assignments()))
    }

    pub fn export_grades(&self) -> Result<String, ServiceError> {
        let inner = self.inner.lock();
        let exam = inner.require_state("exporting grades", &GRADE_EXPORT_STATES)?;
        let assignments = inner.projection.all_assignments();
        let reports = reports(&inner.projection, exam, &assignments);
        Ok(export::grades_csv(exam, &reports, self.registry.as_ref()))
    }

    pub fn export_feedback(&self, booklet: &BookletId) -> Result<String, ServiceError> {
        let inner = self.inner.lock();
        let exam = inner.require_state("exporting feedback", &FEEDBACK_STATES)?;
        if !inner.projection.booklets().contains(booklet) {
            return Err(ServiceError::NotFound(format!("booklet {booklet}")));
        }
        let assignments = inner.projection.all_assignments();
        let report = grade_booklet(booklet, &assignments, exam);
        Ok(export::feedback_text(exam, &report, &assignments))
    }

    /// Booklets that feedback can be exported for.
    pub fn booklets(&self) -> Vec<BookletId> {
        self.inner.lock().projection.booklets().into_iter().collect()
    }
}

fn require_lead(actor: &Actor, what: &str) -> Result<(), ServiceError> {
    if actor.lead {
        Ok(())
    } else {
        Err(ServiceError::Forbidden(format!("{what} needs a lead token")))
    }
}

fn reports(projection: &Projection, exam: &Exam, assignments: &[Assignment]) -> Vec<GradeReport> {
    projection.booklets().iter().map(|b| grade_booklet(b, assignments, exam)).collect()
}

fn build_claim(inner: &Inner, key: SubmissionKey, grader_id: GraderId, lease_expiry: DateTime<Utc>) -> Claim {
    let exam = inner.projection.exam.as_ref().expect("exam present while grading");
    let task = exam.task(&key.1).expect("task checked by caller");
    let wanted: Option<Vec<u32>> = exam.layout.as_ref().map(|l| l.pages_of(&task.id));
    let image_refs = inner
        .projection
        .pages(&key.0)
        .iter()
        .filter(|p| wanted.as_ref().is_none_or(|w| w.contains(&p.page)))
        .map(|p| p.image_ref.clone())
        .collect();
    let acs = task
        .effective_ac_set()
        .into_iter()
        .map(|ac| ClassView { id: ac.id, description: ac.description })
        .collect();
    let current = inner.projection.assignment(&key);
    Claim {
        booklet_id: key.0,
        task_id: key.1,
        grader_id,
        image_refs,
        acs,
        version: current.as_ref().map_or(0, |a| a.version),
        current,
        lease_expiry,
    }
}
