//! Answer classes, tasks and grader assignments.
//!
//! An answer class (AC) is a named set of responses sharing one objectively
//! observable property. Every task carries the four context-independent
//! classes AC1 to AC4 plus its own task-specific classes. Classes overlap,
//! so an assignment holds a set of AC ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{BookletId, GraderId, ProblemId, TaskId};
use crate::points::Points;
use crate::scoring::ScoringRuleSet;
use crate::searchlab::{Detector, DetectorBinding, SearchTask};

pub const AC_EMPTY: &str = "AC1";
pub const AC_CROSSED_OUT: &str = "AC2";
pub const AC_CORRECT: &str = "AC3";
pub const AC_NO_MATCH: &str = "AC4";

pub const COMMON_IDS: [&str; 4] = [AC_EMPTY, AC_CROSSED_OUT, AC_CORRECT, AC_NO_MATCH];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcError {
    #[error("invalid answer class id {0:?}: use letters, digits and '_'")]
    InvalidId(String),
    #[error("answer class {0} already exists")]
    DuplicateId(AcId),
    #[error("answer class description is empty")]
    EmptyDescription,
    #[error("answer class description uses subjective wording {0:?}")]
    SubjectiveWording(String),
    #[error("unknown answer class {0}")]
    UnknownAc(AcId),
    #[error("answer classes {} and {} must not be assigned together", .0.first(), .0.second())]
    ExclusionViolation(ExclusionPair),
    #[error("exclusion pair must name two different classes, got {0} twice")]
    DegenerateExclusion(AcId),
    #[error("a finalized assignment needs at least one answer class")]
    FinalizeEmpty,
    #[error("assignment for task {0} is already finalized")]
    AlreadyFinalized(TaskId),
    #[error("assignment belongs to task {found}, not {expected}")]
    WrongTask { expected: TaskId, found: TaskId },
}

/// Answer class identifier such as `AC10`.
///
/// Ordered naturally, so `AC5` sorts before `AC10`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct AcId(String);

impl AcId {
    pub fn new(id: impl Into<String>) -> Result<Self, AcError> {
        let id = id.into();
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(AcError::InvalidId(id));
        }
        Ok(AcId(id))
    }

    /// For ids known to be well-formed at compile time.
    pub fn from_static(id: &'static str) -> Self {
        AcId::new(id).expect("well-formed static AC id")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_common(&self) -> bool {
        COMMON_IDS.contains(&self.0.as_str())
    }

    /// Trailing number of ids shaped like `AC<n>`.
    pub fn number(&self) -> Option<u64> {
        self.0.strip_prefix("AC")?.parse().ok()
    }
}

impl<'de> Deserialize<'de> for AcId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        AcId::new(String::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for AcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for AcId {
    type Err = AcError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AcId::new(s.trim())
    }
}

fn chunks(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..=bytes.len() {
        if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
            out.push(&s[start..i]);
            start = i;
        }
    }
    out
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let both_digits = x.as_bytes()[0].is_ascii_digit() && y.as_bytes()[0].is_ascii_digit();
        let ord = if both_digits {
            let (x, y) = (x.trim_start_matches('0'), y.trim_start_matches('0'));
            x.len().cmp(&y.len()).then_with(|| x.cmp(y))
        } else {
            x.cmp(y)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

impl Ord for AcId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for AcId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcScope {
    ContextIndependent,
    TaskSpecific(TaskId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerClass {
    pub id: AcId,
    pub scope: AcScope,
    pub description: String,
    pub feedback: Option<String>,
    pub detector: Option<Detector>,
    /// Informational only; points come from the task's rule set.
    pub points_hint: Option<String>,
}

impl AnswerClass {
    /// Text shown to examinees: the feedback, or the description if none.
    pub fn feedback_text(&self) -> &str {
        self.feedback.as_deref().unwrap_or(&self.description)
    }
}

/// The four context-independent classes, with per-exam feedback overrides.
pub fn common_classes(overrides: &BTreeMap<AcId, String>) -> Vec<AnswerClass> {
    let defaults = [
        (AC_EMPTY, "R is empty", "No answer was given."),
        (AC_CROSSED_OUT, "R is crossed out", "The answer was crossed out."),
        (AC_CORRECT, "R is fully correct", "Fully correct."),
        (AC_NO_MATCH, "no suitable AC known", "The answer does not match any known answer class."),
    ];
    defaults
        .into_iter()
        .map(|(id, description, feedback)| {
            let id = AcId::from_static(id);
            let feedback = overrides.get(&id).cloned().unwrap_or_else(|| feedback.to_string());
            AnswerClass {
                id,
                scope: AcScope::ContextIndependent,
                description: description.to_string(),
                feedback: Some(feedback),
                detector: None,
                points_hint: None,
            }
        })
        .collect()
}

/// Case-insensitive substring blocklist for wording that presumes a cause
/// instead of describing an observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocklist {
    terms: Vec<String>,
}

impl Default for Blocklist {
    fn default() -> Self {
        Blocklist::new(["sloppy", "lack of understanding", "careless"])
    }
}

impl Blocklist {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Blocklist { terms: terms.into_iter().map(Into::into).collect() }
    }

    pub fn find(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.terms.iter().find(|t| lower.contains(&t.to_lowercase())).map(String::as_str)
    }
}

/// Unvalidated answer class as written by an exam author.
#[derive(Debug, Clone, PartialEq)]
pub struct AcDraft {
    pub id: String,
    pub scope: AcScope,
    pub description: String,
    pub feedback: Option<String>,
    pub detector: Option<Detector>,
    pub points_hint: Option<String>,
}

impl AcDraft {
    pub fn new(id: &str, scope: AcScope, description: &str) -> Self {
        AcDraft {
            id: id.to_string(),
            scope,
            description: description.to_string(),
            feedback: None,
            detector: None,
            points_hint: None,
        }
    }
}

pub fn define_answer_class(
    draft: AcDraft,
    existing: &[AnswerClass],
    blocklist: &Blocklist,
) -> Result<AnswerClass, AcError> {
    let id = AcId::new(draft.id)?;
    if existing.iter().any(|ac| ac.id == id) {
        return Err(AcError::DuplicateId(id));
    }
    if draft.description.trim().is_empty() {
        return Err(AcError::EmptyDescription);
    }
    if let Some(term) = blocklist.find(&draft.description) {
        return Err(AcError::SubjectiveWording(term.to_string()));
    }
    Ok(AnswerClass {
        id,
        scope: draft.scope,
        description: draft.description,
        feedback: draft.feedback,
        detector: draft.detector,
        points_hint: draft.points_hint,
    })
}

/// Unordered pair of classes that must not be assigned together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[AcId; 2]", into = "[AcId; 2]")]
pub struct ExclusionPair(AcId, AcId);

impl ExclusionPair {
    pub fn new(a: AcId, b: AcId) -> Result<Self, AcError> {
        match a.cmp(&b) {
            Ordering::Less => Ok(ExclusionPair(a, b)),
            Ordering::Greater => Ok(ExclusionPair(b, a)),
            Ordering::Equal => Err(AcError::DegenerateExclusion(a)),
        }
    }

    pub fn first(&self) -> &AcId {
        &self.0
    }

    pub fn second(&self) -> &AcId {
        &self.1
    }

    pub fn is_within(&self, set: &BTreeSet<AcId>) -> bool {
        set.contains(&self.0) && set.contains(&self.1)
    }
}

impl TryFrom<[AcId; 2]> for ExclusionPair {
    type Error = AcError;
    fn try_from([a, b]: [AcId; 2]) -> Result<Self, Self::Error> {
        ExclusionPair::new(a, b)
    }
}

impl From<ExclusionPair> for [AcId; 2] {
    fn from(p: ExclusionPair) -> Self {
        [p.0, p.1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub problem_id: ProblemId,
    pub title: String,
    pub max_points: Points,
    pub prompt_ref: Option<String>,
    pub specific_acs: Vec<AnswerClass>,
    pub ruleset: ScoringRuleSet,
    pub exclusions: Vec<ExclusionPair>,
    /// AC1 and AC2 exclude every other class, AC4 excludes task-specific ones.
    pub default_exclusions: bool,
    pub common_feedback: BTreeMap<AcId, String>,
    /// Search exercise backing automatic classification, if any.
    pub oracle: Option<SearchTask>,
}

impl Task {
    pub fn new(id: &str, problem_id: &str, title: &str, max_points: Points) -> Self {
        Task {
            id: TaskId::new(id),
            problem_id: ProblemId::new(problem_id),
            title: title.to_string(),
            max_points,
            prompt_ref: None,
            specific_acs: Vec::new(),
            ruleset: ScoringRuleSet::default(),
            exclusions: Vec::new(),
            default_exclusions: true,
            common_feedback: BTreeMap::new(),
            oracle: None,
        }
    }

    /// Common classes first, then task-specific ones, each in id order.
    pub fn effective_ac_set(&self) -> Vec<AnswerClass> {
        let mut specific = self.specific_acs.clone();
        specific.sort_by(|a, b| a.id.cmp(&b.id));
        let mut all = common_classes(&self.common_feedback);
        all.extend(specific);
        all
    }

    pub fn effective_ids(&self) -> BTreeSet<AcId> {
        COMMON_IDS
            .iter()
            .map(|id| AcId::from_static(id))
            .chain(self.specific_acs.iter().map(|ac| ac.id.clone()))
            .collect()
    }

    pub fn answer_class(&self, id: &AcId) -> Option<AnswerClass> {
        self.effective_ac_set().into_iter().find(|ac| &ac.id == id)
    }

    /// Declared exclusions plus the default ones when enabled.
    pub fn exclusion_pairs(&self) -> BTreeSet<ExclusionPair> {
        let mut pairs: BTreeSet<ExclusionPair> = self.exclusions.iter().cloned().collect();
        if self.default_exclusions {
            let ids = self.effective_ids();
            for lone in [AC_EMPTY, AC_CROSSED_OUT] {
                let lone = AcId::from_static(lone);
                for other in ids.iter().filter(|id| **id != lone) {
                    pairs.insert(ExclusionPair::new(lone.clone(), other.clone()).expect("distinct"));
                }
            }
            let no_match = AcId::from_static(AC_NO_MATCH);
            for ac in &self.specific_acs {
                pairs.insert(ExclusionPair::new(no_match.clone(), ac.id.clone()).expect("distinct"));
            }
        }
        pairs
    }

    pub fn detector_bindings(&self) -> Vec<DetectorBinding> {
        let mut acs: Vec<&AnswerClass> = self.specific_acs.iter().collect();
        acs.sort_by(|a, b| a.id.cmp(&b.id));
        acs.into_iter()
            .filter_map(|ac| {
                ac.detector.clone().map(|detector| DetectorBinding { ac: ac.id.clone(), detector })
            })
            .collect()
    }

    /// Structural checks: unique class ids, known ids in exclusions and
    /// rules, non-negative half-point maximum.
    pub fn validate(&self, blocklist: &Blocklist) -> Result<(), AcError> {
        let mut seen = common_classes(&BTreeMap::new());
        for ac in &self.specific_acs {
            let draft = AcDraft {
                id: ac.id.to_string(),
                scope: ac.scope.clone(),
                description: ac.description.clone(),
                feedback: ac.feedback.clone(),
                detector: ac.detector.clone(),
                points_hint: ac.points_hint.clone(),
            };
            seen.push(define_answer_class(draft, &seen, blocklist)?);
        }
        let ids = self.effective_ids();
        for pair in &self.exclusions {
            for id in [pair.first(), pair.second()] {
                if !ids.contains(id) {
                    return Err(AcError::UnknownAc(id.clone()));
                }
            }
        }
        for id in &self.common_feedback {
            if !id.0.is_common() {
                return Err(AcError::UnknownAc(id.0.clone()));
            }
        }
        Ok(())
    }
}

pub fn effective_ac_set(task: &Task) -> Vec<AnswerClass> {
    task.effective_ac_set()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Examinee,
    Graders,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub author: GraderId,
    pub text: String,
    pub visibility: Visibility,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStatus {
    #[default]
    InProgress,
    Finalized,
}

/// The classes a grader attached to one answer: one cell of the mapping form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub booklet_id: BookletId,
    pub task_id: TaskId,
    pub ac_ids: BTreeSet<AcId>,
    pub transcription: Option<String>,
    pub grader_id: GraderId,
    pub version: u64,
    #[serde(default)]
    pub comments: Vec<Comment>,
    pub status: AssignmentStatus,
}

impl Assignment {
    pub fn new(booklet_id: &str, task_id: &str, grader_id: &str) -> Self {
        Assignment {
            booklet_id: BookletId::new(booklet_id),
            task_id: TaskId::new(task_id),
            ac_ids: BTreeSet::new(),
            transcription: None,
            grader_id: GraderId::new(grader_id),
            version: 0,
            comments: Vec::new(),
            status: AssignmentStatus::InProgress,
        }
    }

    pub fn with_acs<'a>(mut self, ids: impl IntoIterator<Item = &'a str>) -> Self {
        self.ac_ids = ids.into_iter().map(|s| AcId::new(s).expect("valid AC id")).collect();
        self
    }

    pub fn finalized(mut self) -> Self {
        self.status = AssignmentStatus::Finalized;
        self
    }

    pub fn is_finalized(&self) -> bool {
        self.status == AssignmentStatus::Finalized
    }
}

/// Validates `assignment` against `task` and returns it with the version
/// following `previous` (or 1 for a first recording).
pub fn record_assignment(
    mut assignment: Assignment,
    task: &Task,
    previous: Option<&Assignment>,
) -> Result<Assignment, AcError> {
    if assignment.task_id != task.id {
        return Err(AcError::WrongTask { expected: task.id.clone(), found: assignment.task_id });
    }
    if let Some(prev) = previous {
        if prev.is_finalized() {
            return Err(AcError::AlreadyFinalized(task.id.clone()));
        }
    }
    let known = task.effective_ids();
    if let Some(unknown) = assignment.ac_ids.iter().find(|id| !known.contains(*id)) {
        return Err(AcError::UnknownAc(unknown.clone()));
    }
    if let Some(pair) = task.exclusion_pairs().into_iter().find(|p| p.is_within(&assignment.ac_ids)) {
        return Err(AcError::ExclusionViolation(pair));
    }
    if assignment.is_finalized() && assignment.ac_ids.is_empty() {
        return Err(AcError::FinalizeEmpty);
    }
    assignment.version = previous.map_or(0, |p| p.version) + 1;
    Ok(assignment)
}

/// Feedback for one answer: `<id>: <text>` per assigned class in effective
/// order, then examinee-visible comments.
pub fn compose_feedback(assignment: &Assignment, task: &Task) -> String {
    let mut lines: Vec<String> = task
        .effective_ac_set()
        .iter()
        .filter(|ac| assignment.ac_ids.contains(&ac.id))
        .map(|ac| format!("{}: {}", ac.id, ac.feedback_text()))
        .collect();
    lines.extend(
        assignment
            .comments
            .iter()
            .filter(|c| c.visibility == Visibility::Examinee)
            .map(|c| format!("Comment: {}", c.text)),
    );
    lines.join("\n")
}
