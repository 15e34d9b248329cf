//! Surrogate human–prosthesis dynamics.
//!
//! Each phase is a single-degree-of-freedom knee driven by the impedance
//! torque plus a phase-specific load. The intact side is represented by its
//! gait features, which relax toward the prosthesis features when
//! co-adaptation is enabled. A linear plant with a Riccati oracle is kept
//! alongside for verifying the learner.

mod intact;
mod knee;
pub mod linear;
pub mod ode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{GaitPhase, PerPhase, Range};

pub use intact::{adapt_intact, synthesize_trajectory, IntactKnee};
pub use knee::{integrate_phase, simulate_phase, CycleOutput, KneePlant, PhaseExit, PhaseRun};
pub use linear::{lqr_plant_step, solve_dare, DareSolution, LinearPlant, OracleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("phase {phase} did not terminate within {cap_s} s")]
    NonTermination { phase: GaitPhase, cap_s: f64 },
    #[error("gait cycle failed in phase {phase}")]
    FailedCycle { phase: GaitPhase },
    #[error("invalid plant configuration: {0}")]
    InvalidConfig(String),
}

/// External torque acting on the knee during one phase:
/// `constant + amplitude·sin(2π·frequency·t)`, `t` measured from phase entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadTorque {
    pub constant: f64,
    pub amplitude: f64,
    pub frequency_hz: f64,
}

impl LoadTorque {
    pub const ZERO: LoadTorque = LoadTorque { constant: 0.0, amplitude: 0.0, frequency_hz: 0.0 };

    pub fn at(&self, t: f64) -> f64 {
        self.constant + self.amplitude * (2.0 * std::f64::consts::PI * self.frequency_hz * t).sin()
    }
}

/// Per-phase gains of the intact-side relaxation law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptCoupling {
    pub peak: f64,
    pub duration: f64,
}

/// Admissible intact-side feature values for one phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBounds {
    pub peak: Range,
    pub duration: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// Effective knee inertia, N·m·s²/deg.
    pub inertia: f64,
    pub load: PerPhase<LoadTorque>,
    /// Sampling interval, s.
    pub dt: f64,
    /// RK4 steps per sample interval.
    pub substeps: usize,
    /// Nominal gait cycle duration, s.
    pub cadence: f64,
    /// Standard deviation of additive angle measurement noise, deg.
    pub noise_sigma_theta: f64,
    /// Hard stop range of the knee, deg.
    pub theta_range: Range,
    /// Longest admissible phase before the cycle is declared failed, s.
    pub max_phase_duration: f64,
    /// Excursion from the entry angle required before a velocity zero crossing ends a phase, deg.
    pub min_excursion: f64,
    /// Knee angle at the start of a trial, deg.
    pub initial_theta: f64,
    pub intact_baseline: PerPhase<PhaseFeature>,
    pub adapt_rate: f64,
    pub adapt_coupling: PerPhase<AdaptCoupling>,
    pub feature_bounds: PerPhase<FeatureBounds>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        crate::harness::ExperimentConfig::default().plant
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        let err = |m: &str| Err(PlantError::InvalidConfig(m.to_string()));
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return err("inertia must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return err("dt must be positive");
        }
        if self.substeps == 0 {
            return err("substeps must be at least 1");
        }
        if !(self.cadence > 0.0) {
            return err("cadence must be positive");
        }
        if !(self.noise_sigma_theta >= 0.0 && self.noise_sigma_theta.is_finite()) {
            return err("noise_sigma_theta must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adapt_rate) {
            return err("adapt_rate must lie in [0, 1)");
        }
        if !self.theta_range.is_valid() {
            return err("theta_range is not a valid interval");
        }
        if !self.theta_range.contains(self.initial_theta) {
            return err("initial_theta outside theta_range");
        }
        if !(self.max_phase_duration > self.dt) {
            return err("max_phase_duration must exceed dt");
        }
        if !(self.min_excursion >= 0.0) {
            return err("min_excursion must be non-negative");
        }
        for (p, b) in self.feature_bounds.iter() {
            if !b.peak.is_valid() || !b.duration.is_valid() || b.duration.min < 0.0 {
                return Err(PlantError::InvalidConfig(format!("feature bounds for {p} invalid")));
            }
            let base = self.intact_baseline[p];
            if !(base.duration > 0.0) {
                return Err(PlantError::InvalidConfig(format!("baseline duration for {p} must be positive")));
            }
        }
        for (p, l) in self.load.iter() {
            if ![l.constant, l.amplitude, l.frequency_hz].iter().all(|v| v.is_finite()) {
                return Err(PlantError::InvalidConfig(format!("load torque for {p} not finite")));
            }
        }
        Ok(())
    }
}

/// One annotated phase segment of a trajectory.
///
/// Samples `start..end` belong to the phase; sample `end`, when present, is
/// the first sample of the following phase and closes the segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub phase: GaitPhase,
    pub start: usize,
    pub end: usize,
}

/// Knee angle sampled uniformly every `dt` seconds starting at `t0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub theta: Vec<f64>,
    /// Phase annotations; empty for raw (unannotated) recordings.
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn raw(dt: f64, theta: Vec<f64>) -> Self {
        Trajectory { dt, t0: 0.0, theta, segments: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn is_annotated(&self) -> bool {
        !self.segments.is_empty()
    }

    /// Phase label of every sample; samples outside any segment get the
    /// phase that follows the last segment.
    pub fn sample_phases(&self) -> Vec<Option<GaitPhase>> {
        let mut out = vec![None; self.theta.len()];
        for seg in &self.segments {
            for slot in out.iter_mut().take(seg.end).skip(seg.start) {
                *slot = Some(seg.phase);
            }
        }
        if let Some(last) = self.segments.last() {
            for slot in out.iter_mut().skip(last.end) {
                *slot = Some(last.phase.next());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Prosthesis,
    Intact,
}

/// Peak (or trough) angle in degrees and duration in seconds of one phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseFeature {
    pub peak: f64,
    pub duration: f64,
}

impl PhaseFeature {
    pub const fn new(peak: f64, duration: f64) -> Self {
        PhaseFeature { peak, duration }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitFeatures {
    pub side: Side,
    pub phases: PerPhase<PhaseFeature>,
}

impl GaitFeatures {
    pub fn new(side: Side, phases: PerPhase<PhaseFeature>) -> Self {
        GaitFeatures { side, phases }
    }

    pub fn cycle_duration(&self) -> f64 {
        GaitPhase::ALL.iter().map(|&p| self.phases[p].duration).sum()
    }

    pub fn is_valid(&self) -> bool {
        self.phases.iter().all(|(_, f)| f.duration > 0.0 && f.peak.is_finite() && f.duration.is_finite())
    }
}
