//! Desk-scale acceptance checks live in `tests/acceptance.rs`.
