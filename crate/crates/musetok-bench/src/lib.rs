//! Benchmark-only crate; the benchmarks live in `benches/pipeline.rs`.
//!
//! Run with `cargo bench -p musetok-bench`.
