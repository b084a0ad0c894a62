//! Answer-class based correction of written exams.
//!
//! Graders attach predefined answer classes (ACs) to each student answer.
//! Everything else is derived from those assignments: points come from
//! per-task scoring rules over AC combinations, feedback is composed from
//! per-class texts, and frequent unexplained answers are surfaced as
//! candidates for new classes. Scanned pages are routed back to their
//! booklets through a checksummed QR payload.
//!
//! The `searchlab` module carries ground-truth oracles for graph-search
//! exercises together with detectors for the typical wrong answers.

pub mod ac;
pub mod analytics;
pub mod exam;
pub mod fixtures;
pub mod ids;
pub mod points;
pub mod scoring;
pub mod searchlab;
pub mod sheet;

pub use ac::{AcId, AnswerClass, Assignment, AssignmentStatus, Comment, Task, Visibility};
pub use exam::Exam;
pub use ids::{BookletId, GraderId, ProblemId, TaskId};
pub use points::Points;
