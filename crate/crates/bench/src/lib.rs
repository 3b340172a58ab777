//! Criterion benchmarks for the dyadic kernels; see `benches/`.
