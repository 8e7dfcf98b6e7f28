//! Acceptance suite for the workspace. Everything lives in `tests/acceptance.rs`;
//! run it with `cargo test -p fuzzy-nms-validation --test acceptance`.
