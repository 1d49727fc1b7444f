//! End-to-end acceptance checks for `lowrank-hist`; see `tests/acceptance.rs`.
