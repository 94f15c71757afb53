//! Condition numbers, preconditioner densities and the benchmark harness.

mod bench;
mod condition;

pub use bench::{
    benchmark_latent, match_droptol, parse_methods, read_rows_csv, run_benchmark, write_report_json, write_rows_csv,
    BenchOptions, BenchmarkReport, BenchmarkRow, MatchedSearch, Method, SampleResult, MATCH_DROPTOL_RANGE,
};
pub use condition::{
    condition_number, condition_number_with, density, extreme_eigenvalues, EigenMethod, CONDITION_LABEL,
    DENSE_CONDITION_LIMIT,
};
