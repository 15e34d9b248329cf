//! Configuration, seeded trial orchestration, batch runs and file output.

mod batch;
mod config;
mod lqr_check;
mod metrics;
pub mod output;
mod seeds;
mod trial;

pub use batch::{run_batch, trial_seed, BatchResult};
pub use config::{
    ConfigError, ExperimentConfig, ExplorationConfig, InitialPolicy, LqrConfig, ModeFlags, RlConfig, Tolerances,
    TuningMode, DEFAULT_CONFIG_TOML,
};
pub use lqr_check::{bellman_residual, collect_batch, lqr_check, relative_gain_error, IterationReport, LqrCheckError, LqrReport};
pub use metrics::{compute_rmse, summarize, trial_rmse, updates_to_convergence, BatchSummary, InsufficientData, PhaseRmse, Window, RMSE_WINDOW};
pub use seeds::{derive_seed, splitmix64_mix, STREAM_INIT, STREAM_INTACT, STREAM_LEARNER, STREAM_PLANT, STREAM_POLICY};
pub use trial::{
    run_trial, run_trial_with, sample_initial_schedule, TrialError, TrialOptions, TrialOutcome, TrialRecord, TrialRun,
    UpdateRow,
};
