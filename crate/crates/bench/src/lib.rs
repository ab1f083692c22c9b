//! Criterion benchmarks for the decomposition and projection paths; see
//! `benches/decomposition.rs`. Run with `cargo bench -p sigrep-bench`.
