//! Collaborative grading service.
//!
//! One service instance hosts one exam. Every durable change is appended to a
//! JSON-lines event log in the data directory; the in-memory state is a fold
//! over that log and is rebuilt on startup. Grading claims are leases and are
//! deliberately not logged.

pub mod clock;
pub mod config;
pub mod error;
pub mod events;
pub mod export;
pub mod http;
pub mod lifecycle;
pub mod projection;
pub mod service;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{Actor, ServiceConfig, TokenEntry};
pub use error::ServiceError;
pub use lifecycle::ExamState;
pub use service::{Claim, CommentRequest, GradingService, ServiceOptions, SubmitRequest};
