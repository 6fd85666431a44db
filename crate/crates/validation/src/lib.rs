//! Holds the `acceptance` test target only; see `tests/acceptance.rs`.
//!
//! Kept as its own package so the suite runs after every other test target
//! in `cargo test --workspace`.
