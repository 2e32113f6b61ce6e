//! Criterion benchmarks for the controllers, retrieval, and full scenario runs.
