use rayon::prelude::*;

use super::config::{ConfigError, ExperimentConfig};
use super::metrics::{summarize, BatchSummary};
use super::seeds::derive_seed;
use super::trial::{run_trial, TrialError, TrialRecord};

#[derive(Clone, Debug)]
pub struct BatchResult {
    /// Ordered by trial index.
    pub records: Vec<TrialRecord>,
    pub summary: BatchSummary,
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.master_seed, trial as u64)
}

/// Runs `cfg.trials` independent trials in parallel. Aborted trials appear
/// as non-converged records; only an invalid config is an error.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult, ConfigError> {
    cfg.validate()?;
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|j| run_trial(cfg, j, trial_seed(cfg, j)).map(|o| o.record))
        .collect::<Result<Vec<_>, TrialError>>()
        .map_err(|TrialError::Config(c)| c)?;
    let summary = summarize(&records);
    Ok(BatchResult { records, summary })
}
