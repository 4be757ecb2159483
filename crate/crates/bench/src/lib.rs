//! Criterion benchmarks for the simulator and network hot paths; run with
//! `cargo bench -p regrasp-bench`.
