//! Verdict machinery: efficiency metrics, belief mixing, privacy estimators,
//! survivor accounting and exact binomial oracles.

pub mod belief;
pub mod binomial;
pub mod estimate;
pub mod metrics;
pub mod oracles;
pub mod survivor;
pub mod trace;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("sample sets differ in size ({0} vs {1})")]
    UnequalTrials(usize, usize),
    #[error("run does not support this analysis: {0}")]
    Unsupported(String),
}
