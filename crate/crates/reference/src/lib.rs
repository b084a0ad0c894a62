//! Slow, obvious reimplementations used as test oracles.
//!
//! Nothing here depends on `acgrade-core`. Each routine is written from the
//! textbook definition with plain vectors and linear scans so that a bug in
//! the production code is unlikely to be mirrored here.

pub mod crc;
pub mod rules;
pub mod search;
