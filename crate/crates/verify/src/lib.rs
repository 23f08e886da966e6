//! Acceptance checks live in `tests/acceptance.rs`; run them with `cargo test -p pseudo3d-verify --test acceptance`.
