//! Criterion benchmarks for contrakit live under `benches/`.
