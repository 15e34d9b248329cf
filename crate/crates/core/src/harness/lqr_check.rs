//! Policy iteration on the linear verification plant, scored against the
//! Riccati oracle.

use std::time::Instant;

use nalgebra::{Matrix3x2, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use super::config::LqrConfig;
use crate::plant::linear::{solve_dare, LinearPlant, OracleError};
use crate::rl::{
    basis_phi, instantaneous_cost, policy_evaluation, policy_improvement, project_q, CostMatrices, Experience,
    FeedbackGain, QWeights, RlError, SolverSettings,
};

/// Fixed-point iteration budget of the oracle.
pub const ORACLE_MAX_ITER: usize = 10_000;
const ORACLE_TOL: f64 = 1e-14;
const EPS_PROJ: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LqrCheckError {
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("learner: {0}")]
    Learner(#[from] RlError),
    #[error("invalid lqr config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// `‖G − G*‖_F / ‖G*‖_F` (absolute when `G* = 0`).
    pub gain_error: f64,
    /// Largest per-sample Bellman residual of the batch after evaluation.
    pub bellman_residual: f64,
    pub gain: [[f64; 2]; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct LqrReport {
    pub oracle_gain: [[f64; 2]; 3],
    pub oracle_iterations: usize,
    pub iterations: Vec<IterationReport>,
    pub tolerance: f64,
    /// First iteration whose gain error is below the tolerance.
    pub reached_at: Option<usize>,
    pub elapsed_s: f64,
}

impl LqrReport {
    pub fn passed(&self) -> bool {
        self.reached_at.is_some()
    }

    pub fn final_error(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |r| r.gain_error)
    }
}

fn rows(g: &Matrix3x2<f64>) -> [[f64; 2]; 3] {
    FeedbackGain(*g).rows()
}

pub fn relative_gain_error(g: &Matrix3x2<f64>, oracle: &Matrix3x2<f64>) -> f64 {
    let scale = oracle.norm();
    let diff = (g - oracle).norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Largest `|Wᵀφ(x, u) − U − γ·Wᵀφ(x', u')|` over a batch.
pub fn bellman_residual(batch: &[Experience], weights: &QWeights, gamma: f64) -> f64 {
    batch
        .iter()
        .map(|e| {
            let lhs = weights.0.dot(&basis_phi(&e.x, &e.u));
            let next = weights.0.dot(&basis_phi(&e.x_next, &e.u_next));
            (lhs - e.cost - gamma * next).abs()
        })
        .fold(0.0, f64::max)
}

/// `samples` transitions from independent standard-normal states, with
/// Gaussian exploration of standard deviation `sigma` on every action.
pub fn collect_batch(
    plant: &LinearPlant,
    cost: &CostMatrices,
    gain: &FeedbackGain,
    samples: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Experience> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    (0..samples)
        .map(|_| {
            let x = Vector2::from_fn(|_, _| unit.sample(rng));
            let u = gain.action(&x) + Vector3::from_fn(|_, _| sigma * unit.sample(rng));
            let x_next = plant.step(&x, &u);
            Experience::new(x, u, instantaneous_cost(&x, &u, cost), x_next, gain)
        })
        .collect()
}

/// Runs `cfg.iterations` rounds of evaluate → project → improve, recording
/// the gain error after each round.
pub fn lqr_check(cfg: &LqrConfig) -> Result<LqrReport, LqrCheckError> {
    let start = Instant::now();
    let cost = CostMatrices::new(cfg.rx(), cfg.ru()).map_err(|e| LqrCheckError::Config(e.to_string()))?;
    let (a, b) = (cfg.a(), cfg.b());
    let oracle = solve_dare(&a, &b, cost.rx(), cost.ru(), cfg.gamma, ORACLE_TOL, ORACLE_MAX_ITER)?;
    let plant = LinearPlant { a, b };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gain = FeedbackGain::from_rows(cfg.initial_gain);
    let solver = SolverSettings::default();

    let mut iterations = Vec::with_capacity(cfg.iterations);
    let mut reached_at = None;
    for it in 1..=cfg.iterations {
        let batch = collect_batch(&plant, &cost, &gain, cfg.samples, cfg.sigma, &mut rng);
        let eval = policy_evaluation(&batch, cfg.gamma, &solver)?;
        let residual = bellman_residual(&batch, &eval.weights, cfg.gamma);
        gain = policy_improvement(&project_q(&eval.weights, EPS_PROJ))?;
        let err = relative_gain_error(&gain.0, &oracle.gain);
        if reached_at.is_none() && err < cfg.tolerance {
            reached_at = Some(it);
        }
        iterations.push(IterationReport { iteration: it, gain_error: err, bellman_residual: residual, gain: gain.rows() });
    }
    Ok(LqrReport {
        oracle_gain: rows(&oracle.gain),
        oracle_iterations: oracle.iterations,
        iterations,
        tolerance: cfg.tolerance,
        reached_at,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
