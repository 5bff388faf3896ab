//! Criterion benchmarks for `mlab-core`; run with `cargo bench -p mlab-bench`.
