//! Criterion benchmarks for `kgcurve-core`; see `benches/`.
