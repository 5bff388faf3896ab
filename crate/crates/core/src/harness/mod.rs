//! Experiment configuration, orchestration, and reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{
    load_suite, ExperimentConfig, LearnerSpec, LiftSpec, ManifestRef, Outputs, Seeds, StreamKind,
};
pub use experiment::{run_experiment, streams_for};
pub use report::{emit_convergence_table, Report, CSV_HEADER};
