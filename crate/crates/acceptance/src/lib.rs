//! Acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p acgrade-acceptance --test acceptance`.
