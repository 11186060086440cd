//! Config-driven experiments: seeded trial batches, view features, estimators
//! and per-criterion verdicts, written out as a JSON report plus a flat CSV.

mod config;
mod features;
mod output;
mod runner;
mod sweep;

pub use config::{
    BaseInput, Change, Criteria, EstimateSpec, FeatureId, FeatureSpec, InputSpec, OutputSpec, RunConfig, SweepSpec,
};
pub use features::{extract_features, Targets};
pub use output::{write_report, write_sweep, write_trials_csv};
pub use runner::{run_experiment, DpSummary, ExperimentReport, TrialRecord, Verdict};
pub use sweep::{param_calc, sweep, ParamCalc, SweepRow, SweepTable};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}
