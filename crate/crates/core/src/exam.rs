//! Exam documents: problems, tasks, their answer classes and rule sets.
//!
//! Exams are authored as JSON. Loading reports every problem found, each
//! with a JSON pointer to the offending value, instead of stopping at the
//! first one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::{AcId, AcScope, AnswerClass, Blocklist, ExclusionPair, Task, COMMON_IDS};
use crate::ids::{ProblemId, TaskId};
use crate::points::Points;
use crate::scoring::{ScoringError, ScoringRuleSet};
use crate::searchlab::{run_variant, Detector, SearchTask};
use crate::sheet::{validate_identifier, LayoutTemplate};

/// A finding located by a JSON pointer such as `/problems/0/tasks/2/ruleset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

impl Diagnostic {
    fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { pointer: pointer.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pointer = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{pointer}: {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ExamError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ExamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.diagnostics.iter().map(ToString::to_string).collect();
        f.write_str(&lines.join("\n"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AcDoc {
    id: String,
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feedback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector: Option<Detector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points_hint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    id: String,
    title: String,
    max_points: Points,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt_ref: Option<String>,
    #[serde(default)]
    answer_classes: Vec<AcDoc>,
    #[serde(default)]
    ruleset: ScoringRuleSet,
    #[serde(default)]
    exclusions: Vec<[AcId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_exclusions: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle: Option<SearchTask>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    id: String,
    title: String,
    tasks: Vec<TaskDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExamDoc {
    exam_id: String,
    title: String,
    problems: Vec<ProblemDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    common_feedback_overrides: BTreeMap<AcId, String>,
    #[serde(default = "yes")]
    default_exclusions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<LayoutTemplate>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub id: ProblemId,
    pub title: String,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exam {
    pub exam_id: String,
    pub title: String,
    pub problems: Vec<Problem>,
    pub common_feedback_overrides: BTreeMap<AcId, String>,
    pub default_exclusions: bool,
    pub layout: Option<LayoutTemplate>,
}

fn valid_task_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Exam {
    pub fn from_json(text: &str) -> Result<Exam, ExamError> {
        Exam::from_json_with(text, &Blocklist::default())
    }

    pub fn from_json_with(text: &str, blocklist: &Blocklist) -> Result<Exam, ExamError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ExamDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(e.path());
            ExamError { diagnostics: vec![Diagnostic::new(pointer, e.inner().to_string())] }
        })?;
        Exam::from_doc(doc, blocklist)
    }

    fn from_doc(mut doc: ExamDoc, blocklist: &Blocklist) -> Result<Exam, ExamError> {
        let mut diags = Vec::new();
        if let Err(e) = validate_identifier("exam_id", &doc.exam_id) {
            diags.push(Diagnostic::new("/exam_id", e.to_string()));
        }
        for id in doc.common_feedback_overrides.keys() {
            if !id.is_common() {
                diags.push(Diagnostic::new(
                    format!("/common_feedback_overrides/{id}"),
                    format!("{id} is not one of {}", COMMON_IDS.join(", ")),
                ));
            }
        }
        let mut problem_ids = BTreeSet::new();
        let mut task_ids = BTreeSet::new();
        let mut problems = Vec::new();
        for (pi, p) in std::mem::take(&mut doc.problems).into_iter().enumerate() {
            let ptr = format!("/problems/{pi}");
            if p.id.is_empty() {
                diags.push(Diagnostic::new(format!("{ptr}/id"), "problem id is empty"));
            } else if !problem_ids.insert(p.id.clone()) {
                diags.push(Diagnostic::new(format!("{ptr}/id"), format!("duplicate problem id {}", p.id)));
            }
            let mut tasks = Vec::new();
            for (ti, t) in p.tasks.into_iter().enumerate() {
                let ptr = format!("{ptr}/tasks/{ti}");
                if !valid_task_id(&t.id) {
                    diags.push(Diagnostic::new(
                        format!("{ptr}/id"),
                        format!("task id {:?} must be non-empty letters, digits, '_', '-' or '.'", t.id),
                    ));
                } else if !task_ids.insert(t.id.clone()) {
                    diags.push(Diagnostic::new(format!("{ptr}/id"), format!("duplicate task id {}", t.id)));
                }
                let task = build_task(t, &p.id, &doc, blocklist, &ptr, &mut diags);
                tasks.push(task);
            }
            problems.push(Problem { id: ProblemId::new(p.id), title: p.title, tasks });
        }
        if let Some(layout) = &doc.layout {
            let known: BTreeSet<TaskId> = task_ids.iter().map(TaskId::new).collect();
            if let Err(e) = layout.validate(Some(&known)) {
                diags.push(Diagnostic::new("/layout", e.to_string()));
            }
        }
        if !diags.is_empty() {
            return Err(ExamError { diagnostics: diags });
        }
        Ok(Exam {
            exam_id: doc.exam_id,
            title: doc.title,
            problems,
            common_feedback_overrides: doc.common_feedback_overrides,
            default_exclusions: doc.default_exclusions,
            layout: doc.layout,
        })
    }

    /// Non-fatal findings, such as a lone AC3 not earning full marks.
    pub fn lints(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (pi, p) in self.problems.iter().enumerate() {
            for (ti, t) in p.tasks.iter().enumerate() {
                for message in t.ruleset.lint(t.max_points) {
                    out.push(Diagnostic::new(format!("/problems/{pi}/tasks/{ti}/ruleset"), message));
                }
            }
        }
        out
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.problems.iter().flat_map(|p| p.tasks.iter())
    }

    pub fn task(&self, id: &TaskId) -> Option<&Task> {
        self.tasks().find(|t| &t.id == id)
    }

    pub fn task_count(&self) -> usize {
        self.tasks().count()
    }

    pub fn specific_ac_count(&self) -> usize {
        self.tasks().map(|t| t.specific_acs.len()).sum()
    }

    pub fn max_total(&self) -> Points {
        self.tasks().map(|t| t.max_points).sum()
    }

    pub fn page_count(&self) -> Option<u32> {
        self.layout.as_ref().map(LayoutTemplate::page_count)
    }

    fn to_doc(&self) -> ExamDoc {
        ExamDoc {
            exam_id: self.exam_id.clone(),
            title: self.title.clone(),
            problems: self
                .problems
                .iter()
                .map(|p| ProblemDoc {
                    id: p.id.to_string(),
                    title: p.title.clone(),
                    tasks: p.tasks.iter().map(|t| task_doc(t, self.default_exclusions)).collect(),
                })
                .collect(),
            common_feedback_overrides: self.common_feedback_overrides.clone(),
            default_exclusions: self.default_exclusions,
            layout: self.layout.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("exam serializes")
    }
}

fn task_doc(t: &Task, exam_default: bool) -> TaskDoc {
    TaskDoc {
        id: t.id.to_string(),
        title: t.title.clone(),
        max_points: t.max_points,
        prompt_ref: t.prompt_ref.clone(),
        answer_classes: t
            .specific_acs
            .iter()
            .map(|ac| AcDoc {
                id: ac.id.to_string(),
                description: ac.description.clone(),
                feedback: ac.feedback.clone(),
                detector: ac.detector.clone(),
                points_hint: ac.points_hint.clone(),
            })
            .collect(),
        ruleset: t.ruleset.clone(),
        exclusions: t.exclusions.iter().cloned().map(Into::into).collect(),
        default_exclusions: (t.default_exclusions != exam_default).then_some(t.default_exclusions),
        oracle: t.oracle.clone(),
    }
}

fn build_task(
    t: TaskDoc,
    problem_id: &str,
    exam: &ExamDoc,
    blocklist: &Blocklist,
    ptr: &str,
    diags: &mut Vec<Diagnostic>,
) -> Task {
    let task_id = TaskId::new(t.id.as_str());
    let mut task = Task::new(&t.id, problem_id, &t.title, t.max_points);
    task.prompt_ref = t.prompt_ref;
    task.default_exclusions = t.default_exclusions.unwrap_or(exam.default_exclusions);
    task.common_feedback = exam.common_feedback_overrides.clone();
    task.oracle = t.oracle;
    if t.max_points.is_negative() {
        diags.push(Diagnostic::new(format!("{ptr}/max_points"), "max_points must be non-negative"));
    }

    let mut seen: BTreeSet<AcId> = COMMON_IDS.iter().map(|id| AcId::from_static(id)).collect();
    for (ai, ac) in t.answer_classes.into_iter().enumerate() {
        let ptr = format!("{ptr}/answer_classes/{ai}");
        let id = match AcId::new(ac.id.as_str()) {
            Ok(id) => id,
            Err(e) => {
                diags.push(Diagnostic::new(format!("{ptr}/id"), e.to_string()));
                continue;
            }
        };
        if !seen.insert(id.clone()) {
            diags.push(Diagnostic::new(format!("{ptr}/id"), format!("answer class {id} already exists")));
            continue;
        }
        if ac.description.trim().is_empty() {
            diags.push(Diagnostic::new(format!("{ptr}/description"), "answer class description is empty"));
        } else if let Some(term) = blocklist.find(&ac.description) {
            diags.push(Diagnostic::new(
                format!("{ptr}/description"),
                format!("description uses subjective wording {term:?}; describe what is observable in the answer"),
            ));
        }
        if let Some(detector) = &ac.detector {
            if let Err(message) = check_detector(detector, task.oracle.as_ref()) {
                diags.push(Diagnostic::new(format!("{ptr}/detector"), message));
            }
        }
        task.specific_acs.push(AnswerClass {
            id,
            scope: AcScope::TaskSpecific(task_id.clone()),
            description: ac.description,
            feedback: ac.feedback,
            detector: ac.detector,
            points_hint: ac.points_hint,
        });
    }

    for (ei, [a, b]) in t.exclusions.into_iter().enumerate() {
        let ptr = format!("{ptr}/exclusions/{ei}");
        for id in [&a, &b] {
            if !seen.contains(id) {
                diags.push(Diagnostic::new(ptr.clone(), format!("unknown answer class {id}")));
            }
        }
        match ExclusionPair::new(a, b) {
            Ok(pair) => task.exclusions.push(pair),
            Err(e) => diags.push(Diagnostic::new(ptr, e.to_string())),
        }
    }

    if let Err(e) = t.ruleset.validate(&seen) {
        let pointer = match &e {
            ScoringError::UnknownAcInRule { rule, .. }
            | ScoringError::NegativeAmount { rule }
            | ScoringError::Parse { rule, .. } => format!("{ptr}/ruleset/rules/{rule}"),
            _ => format!("{ptr}/ruleset"),
        };
        diags.push(Diagnostic::new(pointer, e.to_string()));
    }
    task.ruleset = t.ruleset;
    task
}

fn check_detector(detector: &Detector, oracle: Option<&SearchTask>) -> Result<(), String> {
    if *detector == Detector::Manual {
        return Ok(());
    }
    let Some(oracle) = oracle else {
        return Err(format!("detector {detector} needs the task to define an oracle"));
    };
    match detector {
        Detector::Position(n) if *n > oracle.answer_length() => {
            Err(format!("position {n} exceeds the answer length {}", oracle.answer_length()))
        }
        Detector::Variant(v) => run_variant(oracle, v).map(|_| ()).map_err(|e| e.to_string()),
        _ => Ok(()),
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        out.push('/');
        match segment {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

impl Serialize for Exam {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Exam {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ExamDoc::deserialize(deserializer)?;
        Exam::from_doc(doc, &Blocklist::default()).map_err(serde::de::Error::custom)
    }
}
