//! Config-driven experiment harness for `frfid-core`: excitation,
//! simulation, identification, Monte Carlo variance studies and method
//! comparison, each writing a self-describing bundle directory.
//!
//! Every byte of a bundle except `timing.json` is a function of the
//! resolved config alone, independent of the rayon thread count.

pub mod bundle;
pub mod compare;
pub mod config;
pub mod experiment;
pub mod montecarlo;

use std::fmt::Display;

pub use compare::{compare_methods, load_bundle, Comparison, MethodErrors};
pub use config::{validate_config, ExperimentConfig, Method, Setup};
pub use experiment::{run_excite, run_identify, run_simulate, ExternalData, IdentifyResult};
pub use montecarlo::{run_montecarlo, MonteCarloResult, MonteCarloSummary};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("[{stage}] {message}")]
    Stage { stage: &'static str, message: String },
}

impl HarnessError {
    /// 1 for configuration errors, 2 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Stage { .. } => 2,
        }
    }
}

/// `map_err` adapter that tags an error with the pipeline stage.
pub(crate) fn at<E: Display>(stage: &'static str) -> impl FnOnce(E) -> HarnessError {
    move |e| HarnessError::Stage {
        stage,
        message: e.to_string(),
    }
}
