use acgrade_core::ac::AcError;
use acgrade_core::exam::ExamError;

use crate::lifecycle::ExamState;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no exam has been uploaded")]
    NoExam,
    #[error("{operation} is not allowed while the exam is in state {state}")]
    WrongState { operation: &'static str, state: ExamState },
    #[error("cannot move the exam from {from} to {to}")]
    BadTransition { from: ExamState, to: ExamState },
    #[error("no submission left to grade for task {0}")]
    NoWork(String),
    #[error("version conflict: expected {expected}, current version is {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("submission is claimed by {0}")]
    ClaimHeldByOther(String),
    #[error("claim the submission or pass the expected version before submitting")]
    NotClaimed,
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("invalid exam:\n{0}")]
    InvalidExam(#[from] ExamError),
    #[error(transparent)]
    Assignment(#[from] AcError),
    #[error("{0}")]
    Invalid(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
