//! Criterion benchmarks for the inference path live in `benches/`.
