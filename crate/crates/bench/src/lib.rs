//! Criterion benchmarks for `tbma-core`; see `benches/`.
