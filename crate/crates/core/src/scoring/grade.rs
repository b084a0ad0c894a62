use std::collections::BTreeMap;

use serde::Serialize;

use super::rules::evaluate;
use super::ScoringError;
use crate::ac::Assignment;
use crate::exam::Exam;
use crate::ids::{BookletId, ProblemId, TaskId};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskGrade {
    pub task_id: TaskId,
    pub problem_id: ProblemId,
    pub points: Points,
    pub max_points: Points,
    /// False when the task has no finalized assignment yet; it then scores 0.
    pub finalized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GradeReport {
    pub booklet_id: BookletId,
    /// Every task of the exam, in exam order.
    pub tasks: Vec<TaskGrade>,
    pub problem_subtotals: BTreeMap<ProblemId, Points>,
    pub total: Points,
    pub max_total: Points,
    /// Tasks still in progress or never assigned.
    pub flags: Vec<TaskId>,
}

impl GradeReport {
    pub fn task(&self, id: &TaskId) -> Option<&TaskGrade> {
        self.tasks.iter().find(|t| &t.task_id == id)
    }

    pub fn is_complete(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Grades a booklet that must appear in `assignments`.
pub fn grade_exam(booklet: &BookletId, assignments: &[Assignment], exam: &Exam) -> Result<GradeReport, ScoringError> {
    if !assignments.iter().any(|a| &a.booklet_id == booklet) {
        return Err(ScoringError::UnknownBooklet(booklet.clone()));
    }
    Ok(grade_booklet(booklet, assignments, exam))
}

/// Like [`grade_exam`] but treats an absent booklet as entirely ungraded.
pub fn grade_booklet(booklet: &BookletId, assignments: &[Assignment], exam: &Exam) -> GradeReport {
    let mut latest: BTreeMap<&TaskId, &Assignment> = BTreeMap::new();
    for a in assignments.iter().filter(|a| &a.booklet_id == booklet) {
        match latest.get(&a.task_id) {
            Some(prev) if prev.version >= a.version => {}
            _ => {
                latest.insert(&a.task_id, a);
            }
        }
    }
    let mut tasks = Vec::new();
    let mut problem_subtotals: BTreeMap<ProblemId, Points> = BTreeMap::new();
    let mut flags = Vec::new();
    for task in exam.tasks() {
        let finalized = latest.get(&task.id).filter(|a| a.is_finalized());
        let points = match finalized {
            Some(a) => evaluate(&a.ac_ids, &task.ruleset, task.max_points),
            None => {
                flags.push(task.id.clone());
                Points::ZERO
            }
        };
        *problem_subtotals.entry(task.problem_id.clone()).or_default() += points;
        tasks.push(TaskGrade {
            task_id: task.id.clone(),
            problem_id: task.problem_id.clone(),
            points,
            max_points: task.max_points,
            finalized: finalized.is_some(),
        });
    }
    GradeReport {
        booklet_id: booklet.clone(),
        total: tasks.iter().map(|t| t.points).sum(),
        max_total: exam.max_total(),
        tasks,
        problem_subtotals,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{search_problem_exam, synthetic_exam};

    #[test]
    fn full_and_empty_booklets() {
        let exam = synthetic_exam();
        let all_correct: Vec<_> =
            exam.tasks().map(|t| Assignment::new("B1", t.id.as_str(), "g").with_acs(["AC3"]).finalized()).collect();
        let report = grade_exam(&BookletId::new("B1"), &all_correct, &exam).unwrap();
        assert_eq!(report.total, exam.max_total());
        assert!(report.is_complete());
        assert_eq!(report.tasks.len(), 41);

        let all_empty: Vec<_> =
            exam.tasks().map(|t| Assignment::new("B2", t.id.as_str(), "g").with_acs(["AC1"]).finalized()).collect();
        let report = grade_exam(&BookletId::new("B2"), &all_empty, &exam).unwrap();
        assert_eq!(report.total, Points::ZERO);
    }

    #[test]
    fn unfinished_tasks_are_flagged() {
        let exam = search_problem_exam();
        let assignments = vec![
            Assignment::new("B1", "ST1", "g").with_acs(["AC3"]).finalized(),
            Assignment::new("B1", "ST2", "g").with_acs(["AC3"]),
        ];
        let report = grade_exam(&BookletId::new("B1"), &assignments, &exam).unwrap();
        assert_eq!(report.total, Points::whole(1));
        let flagged: Vec<_> = report.flags.iter().map(TaskId::as_str).collect();
        assert_eq!(flagged, ["ST2", "ST3", "ST4", "ST5"]);
        assert_eq!(report.problem_subtotals[&ProblemId::new("P2")], Points::whole(1));
    }

    #[test]
    fn unknown_booklet() {
        let exam = search_problem_exam();
        let err = grade_exam(&BookletId::new("B9"), &[], &exam).unwrap_err();
        assert_eq!(err, ScoringError::UnknownBooklet(BookletId::new("B9")));
    }
}
