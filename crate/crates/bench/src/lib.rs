//! Criterion benchmarks for the history summation backends; see `benches/`.
