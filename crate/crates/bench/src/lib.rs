//! Seeded experiment harness comparing the robust estimators with classical
//! baselines across sample-size, contamination and dimension grids.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{AdversaryChoice, CovModel, Estimator, ExperimentConfig, Scenario};
pub use output::{emit_csv, emit_svg_lines, parse_csv, summarize, to_csv_string, SummaryRow};
pub use runner::{run_experiment, ExperimentOutput, ResultRow};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Core(#[from] gaussrobust::Error),
}

impl BenchError {
    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Io { path: path.display().to_string(), message: err.to_string() }
    }
}
