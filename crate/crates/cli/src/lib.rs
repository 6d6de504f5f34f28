//! Experiment harness for the `aa-admm` crate: configuration, the full
//! generate → analyse → run pipeline, summaries and comparison tables.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod summary;

pub use config::{BetaSource, ExperimentConfig, JacobianSource, ProblemConfig, SchemeSpec, SweepConfig};
pub use error::{PipelineError, Stage};
pub use pipeline::run_experiment;
pub use report::compare_report;
pub use summary::Summary;
