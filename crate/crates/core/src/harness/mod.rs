//! Scenario configuration, the Monte Carlo driver for both protocols,
//! parameter sweeps, report emission and the command-line front end.

pub mod cli;
pub mod config;
pub mod emit;
pub mod metrics;
pub mod sweep;
pub mod trial;

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{BalanceModel, ConfigFile, Protocol, ScenarioConfig};
pub use emit::{emit, Destination, Format};
pub use metrics::MetricsReport;
pub use sweep::{sweep, MAX_GRID_CELLS};
pub use trial::{ClassicTrial, SssTrial, TrialSetup};

use crate::adversary::AdversaryError;
use crate::protocol_sss::ProtocolError;
use crate::randao::RandaoError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("grid has {cells} cells, more than the limit of {max}")]
    GridTooLarge { cells: u128, max: u128 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output encoding failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Randao(#[from] RandaoError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Runs every trial on the current rayon pool. Results come back in trial
/// order whatever the pool size.
pub fn run_classic_trials(cfg: &ScenarioConfig) -> Result<Vec<ClassicTrial>, HarnessError> {
    cfg.validate()?;
    (0..cfg.epochs)
        .into_par_iter()
        .map(|i| trial::run_classic_trial(cfg, i))
        .collect()
}

pub fn run_sss_trials(cfg: &ScenarioConfig) -> Result<Vec<SssTrial>, HarnessError> {
    cfg.validate()?;
    if cfg.protocol != Protocol::Sss {
        return Err(HarnessError::Config("scenario protocol is not sss".into()));
    }
    (0..cfg.epochs)
        .into_par_iter()
        .map(|i| trial::run_sss_trial(cfg, i))
        .collect()
}

pub fn run_classic(cfg: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    if cfg.protocol != Protocol::Classic {
        return Err(HarnessError::Config("scenario protocol is not classic".into()));
    }
    Ok(metrics::summarize_classic(&run_classic_trials(cfg)?))
}

pub fn run_sss(cfg: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    Ok(metrics::summarize_sss(&run_sss_trials(cfg)?))
}

pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    match cfg.protocol {
        Protocol::Classic => run_classic(cfg),
        Protocol::Sss => run_sss(cfg),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
