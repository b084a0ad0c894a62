//! Points from answer-class combinations.
//!
//! A task's rule set starts from a base value and applies every rule whose
//! predicate holds, in order: `set` overwrites the running total, `add` and
//! `deduct` adjust it. The result is clamped to `[0, max_points]`.

mod consequential;
mod expr;
mod grade;
mod rules;

pub use consequential::{consequential_score, ConsequentialBasis, ConsequentialScore};
pub use expr::{Expr, ParseError};
pub use grade::{grade_booklet, grade_exam, GradeReport, TaskGrade};
pub use rules::{evaluate, Action, Rule, ScoringRuleSet};

use thiserror::Error;

use crate::ac::AcId;
use crate::ids::{BookletId, TaskId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("rule {rule}: unknown answer class {id}")]
    UnknownAcInRule { rule: usize, id: AcId },
    #[error("rule {rule}: amounts must be non-negative")]
    NegativeAmount { rule: usize },
    #[error("rule {rule}: {error}")]
    Parse { rule: usize, error: ParseError },
    #[error("base points must be non-negative")]
    NegativeBase,
    #[error("task {0} has no search oracle")]
    NoOracle(TaskId),
    #[error("no assignments for booklet {0}")]
    UnknownBooklet(BookletId),
}
