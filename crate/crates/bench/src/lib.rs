//! Benchmarks for the solver and scans live in `benches/`.
