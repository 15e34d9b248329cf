//! Linear verification plant `x' = A·x + B·u` and its discrete algebraic
//! Riccati oracle.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Matrix5, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("Riccati fixed-point iteration did not converge in {iterations} steps")]
    Divergence { iterations: usize },
    #[error("Ru + γ·BᵀPB is singular")]
    Singular,
}

/// `A·x + B·u`.
pub fn lqr_plant_step(x: &Vector2<f64>, u: &Vector3<f64>, a: &Matrix2<f64>, b: &Matrix2x3<f64>) -> Vector2<f64> {
    a * x + b * u
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPlant {
    pub a: Matrix2<f64>,
    pub b: Matrix2x3<f64>,
}

impl LinearPlant {
    pub fn step(&self, x: &Vector2<f64>, u: &Vector3<f64>) -> Vector2<f64> {
        lqr_plant_step(x, u, &self.a, &self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DareSolution {
    /// Cost-to-go matrix P.
    pub p: Matrix2<f64>,
    /// Optimal feedback gain G with `u = −G·x`.
    pub gain: Matrix3x2<f64>,
    pub iterations: usize,
}

/// Solves `P = Rx + γAᵀPA − γ²AᵀPB(Ru + γBᵀPB)⁻¹BᵀPA` by fixed-point
/// iteration from `P = Rx`.
pub fn solve_dare(
    a: &Matrix2<f64>,
    b: &Matrix2x3<f64>,
    rx: &Matrix2<f64>,
    ru: &Matrix3<f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DareSolution, OracleError> {
    let mut p = *rx;
    for it in 1..=max_iter {
        let s = (ru + gamma * b.transpose() * p * b).try_inverse().ok_or(OracleError::Singular)?;
        let next = rx + gamma * a.transpose() * p * a
            - gamma * gamma * a.transpose() * p * b * s * b.transpose() * p * a;
        let next = 0.5 * (next + next.transpose());
        if !next.iter().all(|v| v.is_finite()) {
            return Err(OracleError::Divergence { iterations: it });
        }
        let delta = (next - p).abs().max();
        p = next;
        if delta <= tol * (1.0 + p.abs().max()) {
            let gain = riccati_gain(a, b, ru, &p, gamma)?;
            return Ok(DareSolution { p, gain, iterations: it });
        }
    }
    Err(OracleError::Divergence { iterations: max_iter })
}

/// `γ(Ru + γBᵀPB)⁻¹BᵀPA`.
pub fn riccati_gain(
    a: &Matrix2<f64>,
    b: &Matrix2x3<f64>,
    ru: &Matrix3<f64>,
    p: &Matrix2<f64>,
    gamma: f64,
) -> Result<Matrix3x2<f64>, OracleError> {
    let s = (ru + gamma * b.transpose() * p * b).try_inverse().ok_or(OracleError::Singular)?;
    Ok(gamma * s * b.transpose() * p * a)
}

/// Cost-to-go matrix of the fixed policy `u = −G·x`:
/// `P = Rx + GᵀRuG + γ(A − BG)ᵀP(A − BG)`.
pub fn policy_cost_matrix(
    a: &Matrix2<f64>,
    b: &Matrix2x3<f64>,
    rx: &Matrix2<f64>,
    ru: &Matrix3<f64>,
    gain: &Matrix3x2<f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Matrix2<f64>, OracleError> {
    let closed = a - b * gain;
    let stage = rx + gain.transpose() * ru * gain;
    let mut p = stage;
    for it in 1..=max_iter {
        let next = stage + gamma * closed.transpose() * p * closed;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(OracleError::Divergence { iterations: it });
        }
        let delta = (next - p).abs().max();
        p = next;
        if delta <= tol * (1.0 + p.abs().max()) {
            return Ok(0.5 * (p + p.transpose()));
        }
    }
    Err(OracleError::Divergence { iterations: max_iter })
}

/// Q-function kernel over `z = (x, u)` given the successor cost matrix `P`:
/// `Q(x, u) = U(x, u) + γ(Ax + Bu)ᵀP(Ax + Bu) = zᵀHz`.
pub fn q_kernel(
    a: &Matrix2<f64>,
    b: &Matrix2x3<f64>,
    rx: &Matrix2<f64>,
    ru: &Matrix3<f64>,
    p: &Matrix2<f64>,
    gamma: f64,
) -> Matrix5<f64> {
    let mut h = Matrix5::zeros();
    h.fixed_view_mut::<2, 2>(0, 0).copy_from(&(rx + gamma * a.transpose() * p * a));
    let hxu = gamma * a.transpose() * p * b;
    h.fixed_view_mut::<2, 3>(0, 2).copy_from(&hxu);
    h.fixed_view_mut::<3, 2>(2, 0).copy_from(&hxu.transpose());
    h.fixed_view_mut::<3, 3>(2, 2).copy_from(&(ru + gamma * b.transpose() * p * b));
    h
}
