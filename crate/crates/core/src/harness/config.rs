//! Experiment configuration.
//!
//! The on-disk format is TOML; every table rejects unknown keys. The shipped
//! `configs/default.toml` is compiled in and backs every `Default` impl in
//! the crate, so there is a single source for default values.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureExtractorConfig;
use crate::gait::{ActionBounds, ImpedanceBounds, ImpedanceSchedule, ImpedanceTriple, PerPhase};
use crate::plant::PlantConfig;
use crate::rl::{CostMatrices, Exploration, FeedbackGain, LearnerSettings, SolverSettings};

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningMode {
    /// All four phase learners act at every update.
    Simultaneous,
    /// One phase at a time acts, moving on once it is within tolerance.
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialPolicy {
    /// Use `rl.initial_gain` as given.
    Shipped,
    /// Scale every entry of `rl.initial_gain` by an independent factor drawn
    /// from `U(1 − spread, 1 + spread)`; redrawn after a failed cycle.
    Random { spread: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Peak error tolerance, deg.
    pub peak_deg: f64,
    /// Duration error tolerance as a fraction of the cycle.
    pub duration_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFlags {
    pub coadapt: bool,
    pub tuning: TuningMode,
    pub initial_policy: InitialPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationConfig {
    /// Initial noise standard deviation as a fraction of each action bound.
    pub sigma_fraction: f64,
    /// Multiplicative decay applied at every policy improvement.
    pub decay: f64,
    /// Lower limit of the noise as a fraction of each action bound.
    pub floor_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    pub rx: [[f64; 2]; 2],
    pub ru: [[f64; 3]; 3],
    pub gamma: f64,
    /// New transitions per policy iteration.
    pub batch_size: usize,
    /// Most recent transitions used by each evaluation (≥ `batch_size`).
    pub memory: usize,
    pub eps_proj: f64,
    /// Largest relative gain change accepted per improvement (`inf` = any).
    pub trust_radius: f64,
    pub exploration: ExplorationConfig,
    pub solver: SolverSettings,
    pub action_bounds: ActionBounds,
    /// Rows of the initial feedback gain `G` per phase (`u = −G·x`).
    pub initial_gain: PerPhase<[[f64; 2]; 3]>,
}

impl RlConfig {
    pub fn cost(&self) -> Result<CostMatrices, ConfigError> {
        CostMatrices::from_rows(self.rx, self.ru).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn exploration(&self) -> Exploration {
        let b = self.action_bounds.as_array();
        Exploration {
            sigma: b.map(|v| v * self.exploration.sigma_fraction),
            decay: self.exploration.decay,
            floor: b.map(|v| v * self.exploration.floor_fraction),
        }
    }

    pub fn learner_settings(&self) -> LearnerSettings {
        LearnerSettings {
            gamma: self.gamma,
            batch_size: self.batch_size,
            memory: self.memory,
            eps_proj: self.eps_proj,
            trust_radius: self.trust_radius,
            solver: self.solver,
        }
    }

    pub fn initial_gain(&self) -> PerPhase<FeedbackGain> {
        self.initial_gain.map(|_, rows| FeedbackGain::from_rows(*rows))
    }
}

/// Linear verification problem for the learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    pub a: [[f64; 2]; 2],
    pub b: [[f64; 3]; 2],
    pub rx: [[f64; 2]; 2],
    pub ru: [[f64; 3]; 3],
    pub gamma: f64,
    /// Stabilizing gain the iteration starts from.
    pub initial_gain: [[f64; 2]; 3],
    /// Policy iterations allowed to reach the tolerance.
    pub iterations: usize,
    /// Transitions collected per policy evaluation.
    pub samples: usize,
    /// Exploration noise standard deviation on each action component.
    pub sigma: f64,
    /// Relative gain error required against the Riccati oracle.
    pub tolerance: f64,
    pub seed: u64,
}

impl LqrConfig {
    pub fn a(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.a[i][j])
    }

    pub fn b(&self) -> Matrix2x3<f64> {
        Matrix2x3::from_fn(|i, j| self.b[i][j])
    }

    pub fn rx(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.rx[i][j])
    }

    pub fn ru(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.ru[i][j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub max_updates: usize,
    /// Consecutive failed cycles after which a trial is aborted.
    pub max_failed_cycles: usize,
    /// Half-width of the uniform initial-impedance distribution, as a
    /// fraction of each reference value.
    pub init_spread: f64,
    pub output_dir: PathBuf,
    pub tolerance: Tolerances,
    pub modes: ModeFlags,
    pub reference: PerPhase<ImpedanceTriple>,
    pub impedance_bounds: PerPhase<ImpedanceBounds>,
    pub plant: PlantConfig,
    pub features: FeatureExtractorConfig,
    pub rl: RlConfig,
    pub lqr: LqrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::from_toml_str(DEFAULT_CONFIG_TOML).expect("shipped default config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn reference_schedule(&self) -> ImpedanceSchedule {
        ImpedanceSchedule::new(self.reference)
    }

    /// Duration tolerance in seconds for a cycle of the given length.
    pub fn duration_tolerance_s(&self, cycle: f64) -> f64 {
        self.tolerance.duration_fraction * cycle
    }

    /// Adaptation rate actually used by the plant given the mode flag.
    pub fn effective_plant(&self) -> PlantConfig {
        let mut plant = self.plant.clone();
        if !self.modes.coadapt {
            plant.adapt_rate = 0.0;
        }
        plant
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.max_updates < 1 {
            return bad("max_updates must be at least 1".into());
        }
        if self.max_failed_cycles < 1 {
            return bad("max_failed_cycles must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.init_spread) {
            return bad("init_spread must lie in [0, 1)".into());
        }
        if !(self.tolerance.peak_deg > 0.0 && self.tolerance.duration_fraction > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let InitialPolicy::Random { spread } = self.modes.initial_policy {
            if !(spread >= 0.0 && spread.is_finite()) {
                return bad("initial_policy spread must be non-negative".into());
            }
        }
        for (p, b) in self.impedance_bounds.iter() {
            if !b.is_valid() {
                return bad(format!("impedance bounds for {p} invalid"));
            }
            if !b.contains(&self.reference[p]) {
                return bad(format!("reference impedance for {p} outside its bounds"));
            }
        }
        self.plant.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.features.validate().map_err(ConfigError::Invalid)?;

        let rl = &self.rl;
        rl.cost()?;
        if !(rl.gamma > 0.0 && rl.gamma <= 1.0) {
            return bad("rl.gamma must lie in (0, 1]".into());
        }
        if rl.batch_size < crate::rl::BASIS_LEN {
            return bad(format!("rl.batch_size must be at least {}", crate::rl::BASIS_LEN));
        }
        if rl.memory < rl.batch_size {
            return bad("rl.memory must be at least rl.batch_size".into());
        }
        if !(rl.trust_radius > 0.0) {
            return bad("rl.trust_radius must be positive".into());
        }
        if !(rl.eps_proj > 0.0) {
            return bad("rl.eps_proj must be positive".into());
        }
        if !rl.action_bounds.is_valid() {
            return bad("rl.action_bounds must be non-negative".into());
        }
        let ex = &rl.exploration;
        if !(ex.sigma_fraction >= 0.0 && ex.floor_fraction >= 0.0 && ex.decay > 0.0 && ex.decay <= 1.0) {
            return bad("rl.exploration values out of range".into());
        }
        if rl.initial_gain.iter().any(|(_, g)| g.iter().flatten().any(|v| !v.is_finite())) {
            return bad("rl.initial_gain must be finite".into());
        }

        let lqr = &self.lqr;
        CostMatrices::new(lqr.rx(), lqr.ru()).map_err(|e| ConfigError::Invalid(format!("lqr: {e}")))?;
        if !(lqr.gamma > 0.0 && lqr.gamma <= 1.0) {
            return bad("lqr.gamma must lie in (0, 1]".into());
        }
        if lqr.samples < crate::rl::BASIS_LEN || lqr.iterations < 1 || !(lqr.tolerance > 0.0) {
            return bad("lqr iteration settings out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_parses() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.trials, 30);
        assert_eq!(cfg.max_updates, 50);
        assert_eq!(cfg.tolerance.peak_deg, 1.5);
        assert_eq!(cfg.tolerance.duration_fraction, 0.02);
        assert_eq!(cfg.features.smoothing_window, 10);
        assert_eq!(cfg.features.peak_threshold, 1.5);
        assert_eq!(cfg.rl.batch_size, 20);
        assert_eq!(cfg.rl.gamma, 0.95);
        assert_eq!(cfg.plant.dt, 0.01);
        assert!((cfg.init_spread - 0.2 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("bogus_key = 3\n{DEFAULT_CONFIG_TOML}");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
        let text = DEFAULT_CONFIG_TOML.replace("[plant]\n", "[plant]\nmass = 3\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.plant.adapt_rate = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.rl.rx = [[1.0, 0.0], [0.0, -1.0]];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.tolerance.peak_deg = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.rl.batch_size = 14;
        assert!(cfg.validate().is_err());
    }
}
