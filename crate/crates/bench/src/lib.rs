//! Criterion benchmarks for frfid; see `benches/`.
