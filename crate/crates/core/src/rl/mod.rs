//! Policy iteration with a quadratic Q-function, one learner per gait phase.
//!
//! Each learner collects transitions `(x, u, U, x')` of its phase's tracking
//! error, fits `Q(x, u) = Wᵀφ(x, u)` by least squares on the Bellman
//! equation, keeps the action block of the fitted kernel positive definite,
//! and switches to the greedy gain `G = Huu⁻¹·Hux`.

pub mod basis;
mod evaluation;
mod learner;
mod policy;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use thiserror::Error;

use crate::features::TrackingState;

pub use basis::{basis_phi, QWeights, BASIS_LEN};
pub use evaluation::{policy_evaluation, Evaluation, Experience, SolverSettings};
pub use learner::{Improvement, LearnerCheckpoint, LearnerSettings, LearnerState, PhaseLearner, CHECKPOINT_VERSION};
pub use policy::{act, policy_improvement, project_q, Exploration, FeedbackGain, Policy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("need at least {need} experiences, have {have}")]
    InsufficientData { have: usize, need: usize },
    #[error("regressor condition number {condition:e} exceeds the cap")]
    IllConditioned { condition: f64 },
    #[error("experience batch contains non-finite values")]
    NonFinite,
    #[error("action block of the Q kernel is not positive definite")]
    SingularHuu,
    #[error("invalid cost matrices: {0}")]
    InvalidCost(String),
}

/// Stage cost weights `U(x, u) = xᵀRx·x + uᵀRu·u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostMatrices {
    rx: Matrix2<f64>,
    ru: Matrix3<f64>,
}

impl CostMatrices {
    pub fn new(rx: Matrix2<f64>, ru: Matrix3<f64>) -> Result<Self, RlError> {
        check_spd(rx.as_slice(), 2, "Rx")?;
        check_spd(ru.as_slice(), 3, "Ru")?;
        Ok(CostMatrices { rx, ru })
    }

    pub fn from_rows(rx: [[f64; 2]; 2], ru: [[f64; 3]; 3]) -> Result<Self, RlError> {
        CostMatrices::new(Matrix2::from_fn(|i, j| rx[i][j]), Matrix3::from_fn(|i, j| ru[i][j]))
    }

    pub fn rx(&self) -> &Matrix2<f64> {
        &self.rx
    }

    pub fn ru(&self) -> &Matrix3<f64> {
        &self.ru
    }
}

fn check_spd(values: &[f64], n: usize, name: &str) -> Result<(), RlError> {
    let m = nalgebra::DMatrix::from_column_slice(n, n, values);
    if (&m - m.transpose()).abs().max() > 1e-12 {
        return Err(RlError::InvalidCost(format!("{name} is not symmetric")));
    }
    if SymmetricEigen::new(m).eigenvalues.min() <= 0.0 {
        return Err(RlError::InvalidCost(format!("{name} is not positive definite")));
    }
    Ok(())
}

pub fn instantaneous_cost(x: &Vector2<f64>, u: &Vector3<f64>, r: &CostMatrices) -> f64 {
    x.dot(&(r.rx * x)) + u.dot(&(r.ru * u))
}

/// Number of consecutive updates inspected by [`check_convergence`].
pub const CONVERGENCE_WINDOW: usize = 10;
/// Updates within tolerance required inside the window.
pub const CONVERGENCE_REQUIRED: usize = 8;

/// True when at least 8 of the last 10 states have `|ΔP| ≤ tol_peak` and
/// `|ΔD|/cycle ≤ tol_duration` together. Fewer than 10 states never pass.
pub fn check_convergence(recent: &[TrackingState], tol_peak: f64, tol_duration: f64) -> bool {
    if recent.len() < CONVERGENCE_WINDOW {
        return false;
    }
    let window = &recent[recent.len() - CONVERGENCE_WINDOW..];
    window.iter().filter(|s| s.within(tol_peak, tol_duration)).count() >= CONVERGENCE_REQUIRED
}
