//! Gait feature extraction and the tracking state.
//!
//! Prosthesis trajectories carry phase annotations from the controller, so
//! their features are read per segment. Intact-side recordings are raw and
//! are segmented from their extrema. Intact features are smoothed and
//! gated by a threshold before they become the tracking target.

mod extract;
mod target;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::GaitPhase;
use crate::plant::GaitFeatures;

pub use extract::{
    centered_moving_average, detect_extrema, extract_features, extract_phase_features, extract_raw_features,
    Extremum, ExtremumKind,
};
pub use target::{average_features, smooth_target, threshold_update, TargetTracker};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureExtractorConfig {
    /// Number of most recent intact-side measurements averaged into a target.
    pub smoothing_window: usize,
    /// Minimum change of a peak target before it is replaced, deg.
    pub peak_threshold: f64,
    /// Minimum change of a duration target before it is replaced, as a
    /// fraction of the target cycle duration.
    pub duration_threshold: f64,
    /// Gait cycles aggregated into one state sample.
    pub cadence: usize,
    /// Width of the centered moving average applied before extrema detection.
    pub raw_smoothing: usize,
    /// Minimum rise or fall between accepted extrema, deg.
    pub prominence: f64,
}

impl Default for FeatureExtractorConfig {
    fn default() -> Self {
        crate::harness::ExperimentConfig::default().features
    }
}

impl FeatureExtractorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.smoothing_window < 1 {
            return Err("smoothing_window must be at least 1".into());
        }
        if !(self.peak_threshold >= 0.0) || !(self.duration_threshold >= 0.0) {
            return Err("thresholds must be non-negative".into());
        }
        if self.cadence < 1 {
            return Err("cadence must be at least 1".into());
        }
        if self.raw_smoothing < 1 || self.raw_smoothing % 2 == 0 {
            return Err("raw_smoothing must be an odd window of at least 1".into());
        }
        if !(self.prominence >= 0.0) {
            return Err("prominence must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-phase tracking error `x = (ΔP, ΔD)`, prosthesis minus intact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingState {
    pub phase: GaitPhase,
    /// Peak error, deg.
    pub dp: f64,
    /// Duration error, s.
    pub dd: f64,
    /// Target cycle duration used to express `dd` as a fraction, s.
    pub cycle_duration: f64,
}

impl TrackingState {
    pub fn dd_fraction(&self) -> f64 {
        self.dd / self.cycle_duration
    }

    pub fn dd_percent(&self) -> f64 {
        100.0 * self.dd_fraction()
    }

    pub fn as_vector(&self) -> [f64; 2] {
        [self.dp, self.dd]
    }

    pub fn within(&self, tol_peak: f64, tol_duration: f64) -> bool {
        self.dp.abs() <= tol_peak && self.dd_fraction().abs() <= tol_duration
    }
}

/// `(P^p − P^i, D^p − D^i)` for one phase.
pub fn compute_state(prosthesis: &GaitFeatures, intact_target: &GaitFeatures, phase: GaitPhase) -> TrackingState {
    let p = prosthesis.phases[phase];
    let i = intact_target.phases[phase];
    TrackingState {
        phase,
        dp: p.peak - i.peak,
        dd: p.duration - i.duration,
        cycle_duration: intact_target.cycle_duration(),
    }
}
