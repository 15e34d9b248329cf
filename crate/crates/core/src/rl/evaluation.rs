use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::basis::{basis_phi, Basis, QWeights, BASIS_LEN};
use super::{FeedbackGain, RlError};

/// One observed transition under the policy being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub x: Vector2<f64>,
    pub u: Vector3<f64>,
    /// Stage cost `U(x, u)`.
    pub cost: f64,
    pub x_next: Vector2<f64>,
    /// Noise-free policy action at `x_next`.
    pub u_next: Vector3<f64>,
}

impl Experience {
    pub fn new(x: Vector2<f64>, u: Vector3<f64>, cost: f64, x_next: Vector2<f64>, policy: &FeedbackGain) -> Self {
        Experience { x, u, cost, x_next, u_next: policy.action(&x_next) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.u.iter()).chain(self.x_next.iter()).chain(self.u_next.iter()).all(|v| v.is_finite())
            && self.cost.is_finite()
    }
}

/// Numerical guards for the least-squares solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Tikhonov weight, relative to the largest squared singular value.
    pub lambda_reg: f64,
    /// Condition number above which regularization is applied.
    pub regularize_above: f64,
    /// Largest admissible condition number after regularization.
    pub condition_cap: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { lambda_reg: 1e-8, regularize_above: 1e10, condition_cap: 1e12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub weights: QWeights,
    /// `‖X·W − Y‖₂`.
    pub residual_norm: f64,
    /// Condition number of the regressor before regularization.
    pub condition: f64,
    pub regularized: bool,
}

/// Least-squares solution of `Wᵀ(φ(x, u) − γ·φ(x', u')) = U(x, u)` over the
/// batch, via the SVD pseudo-inverse.
pub fn policy_evaluation(batch: &[Experience], gamma: f64, settings: &SolverSettings) -> Result<Evaluation, RlError> {
    if batch.len() < BASIS_LEN {
        return Err(RlError::InsufficientData { have: batch.len(), need: BASIS_LEN });
    }
    if batch.iter().any(|e| !e.is_finite()) {
        return Err(RlError::NonFinite);
    }
    let n = batch.len();
    let mut x = DMatrix::<f64>::zeros(n, BASIS_LEN);
    let mut y = DVector::<f64>::zeros(n);
    for (r, e) in batch.iter().enumerate() {
        let row = basis_phi(&e.x, &e.u) - gamma * basis_phi(&e.x_next, &e.u_next);
        x.row_mut(r).copy_from(&row.transpose());
        y[r] = e.cost;
    }

    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let s_max = sv.max();
    let s_min = sv.min();
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(RlError::IllConditioned { condition: f64::INFINITY });
    }
    let condition = s_max / s_min;
    let regularized = !(condition <= settings.regularize_above);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");

    let lambda = if regularized { settings.lambda_reg * s_max * s_max } else { 0.0 };
    if regularized {
        let effective = ((s_max * s_max + lambda) / (s_min * s_min + lambda)).sqrt();
        if !(effective <= settings.condition_cap) {
            return Err(RlError::IllConditioned { condition: effective });
        }
    }
    // Pseudo-inverse cutoff for exactly rank-deficient directions.
    let cutoff = s_max * (n.max(BASIS_LEN) as f64) * f64::EPSILON;
    let uty = u.transpose() * &y;
    let mut w = Basis::zeros();
    for k in 0..sv.len() {
        let s = sv[k];
        let factor = if regularized {
            s / (s * s + lambda)
        } else if s > cutoff {
            1.0 / s
        } else {
            0.0
        };
        if factor != 0.0 {
            for c in 0..BASIS_LEN {
                w[c] += factor * uty[k] * v_t[(k, c)];
            }
        }
    }
    let residual_norm = (&x * DVector::from_column_slice(w.as_slice()) - &y).norm();
    Ok(Evaluation { weights: QWeights(w), residual_norm, condition, regularized })
}
