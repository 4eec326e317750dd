//! Holds no code. The end-to-end acceptance suite lives in
//! `tests/acceptance.rs`; run it with
//! `cargo test -p mistqueue-validation --test acceptance`.
