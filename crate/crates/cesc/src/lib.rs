//! Command-line and library front end for commute-time spectral clustering:
//! file formats, multi-threaded stages, end-to-end runs, parameter sweeps and
//! scaling benchmarks on top of `cesc-core`.

pub mod bench;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod sweep;

pub use pipeline::{prepare, run_cluster, InputKind, InputSpec, Pipeline, Prepared, RunConfig, RunOutcome};
pub use report::RunReport;
