//! Benchmark-only crate; the measurable surface lives in `vstab-core` and
//! the benches under `benches/`.
