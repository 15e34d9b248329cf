use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluation::{policy_evaluation, Evaluation, Experience, SolverSettings};
use super::policy::{act, policy_improvement, project_q, Exploration, FeedbackGain, Policy};
use super::{instantaneous_cost, CostMatrices, QWeights, RlError};
use crate::gait::{Action, ActionBounds, GaitPhase, PerPhase};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Online policy iteration for a single gait phase.
///
/// Every `batch_size` new transitions the policy is evaluated, projected and
/// improved. Evaluation uses the latest `memory` transitions (at least the
/// new batch); older ones are relabeled with the current policy's action at
/// their successor state, which keeps the data policy-consistent because the
/// Q-function is evaluated off-policy.
/// Hyperparameters shared by the four phase learners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSettings {
    pub gamma: f64,
    /// New transitions per policy iteration.
    pub batch_size: usize,
    /// Most recent transitions used by each evaluation (≥ `batch_size`).
    pub memory: usize,
    pub eps_proj: f64,
    /// Largest accepted `‖G_new − G‖_F / (1 + ‖G‖_F)`; `inf` accepts every
    /// improved gain.
    pub trust_radius: f64,
    pub solver: SolverSettings,
}

impl LearnerSettings {
    /// Plain policy iteration: fresh batches only, every gain accepted.
    pub fn plain(gamma: f64, batch_size: usize, eps_proj: f64) -> Self {
        LearnerSettings {
            gamma,
            batch_size,
            memory: batch_size,
            eps_proj,
            trust_radius: f64::INFINITY,
            solver: SolverSettings::default(),
        }
    }
}

/// Result of a policy-iteration attempt that got as far as a new gain.
#[derive(Clone, Copy, Debug)]
pub struct Improvement {
    pub evaluation: Evaluation,
    /// False when the candidate gain fell outside the trust radius and the
    /// previous policy was kept.
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct PhaseLearner {
    phase: GaitPhase,
    cost: CostMatrices,
    settings: LearnerSettings,
    policy: Policy,
    rng: ChaCha8Rng,
    buffer: Vec<Experience>,
    fresh: usize,
    iterations: usize,
    rejected: usize,
    weights: Option<QWeights>,
}

impl PhaseLearner {
    pub fn new(phase: GaitPhase, cost: CostMatrices, settings: LearnerSettings, policy: Policy, seed: u64) -> Self {
        let settings = LearnerSettings { memory: settings.memory.max(settings.batch_size), ..settings };
        PhaseLearner {
            phase,
            cost,
            settings,
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: Vec::with_capacity(settings.memory),
            fresh: 0,
            iterations: 0,
            rejected: 0,
            weights: None,
        }
    }

    pub fn phase(&self) -> GaitPhase {
        self.phase
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn weights(&self) -> Option<&QWeights> {
        self.weights.as_ref()
    }

    /// Accepted policy improvements.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Candidate gains discarded by the trust radius.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Transitions held for the next evaluation.
    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Transitions recorded since the last policy improvement.
    pub fn fresh(&self) -> usize {
        self.fresh
    }

    pub fn cost(&self) -> &CostMatrices {
        &self.cost
    }

    /// Replaces the feedback gain and drops the collected transitions.
    pub fn set_gain(&mut self, gain: FeedbackGain) {
        self.policy.gain = gain;
        self.buffer.clear();
        self.fresh = 0;
    }

    /// Exploratory action at state `x`.
    pub fn act(&mut self, x: &Vector2<f64>, bounds: &ActionBounds) -> Action {
        act(&self.policy, x, &mut self.rng, bounds)
    }

    /// Stores the transition `x --u--> x_next`; returns its stage cost.
    pub fn record(&mut self, x: &Vector2<f64>, u: &Action, x_next: &Vector2<f64>) -> f64 {
        let u = Vector3::from(u.as_array());
        let cost = instantaneous_cost(x, &u, &self.cost);
        if self.buffer.len() == self.settings.memory {
            self.buffer.remove(0);
        }
        self.buffer.push(Experience::new(*x, u, cost, *x_next, &self.policy.gain));
        self.fresh += 1;
        cost
    }

    pub fn stage_cost(&self, x: &Vector2<f64>, u: &Action) -> f64 {
        instantaneous_cost(x, &Vector3::from(u.as_array()), &self.cost)
    }

    /// Runs one policy iteration once `batch_size` new transitions are in.
    ///
    /// Evaluation errors keep the data so that the next attempt sees more.
    pub fn improve_if_ready(&mut self) -> Result<Option<Improvement>, RlError> {
        let s = self.settings;
        if self.fresh < s.batch_size {
            return Ok(None);
        }
        let current = self.policy.gain;
        for e in self.buffer.iter_mut() {
            e.u_next = current.action(&e.x_next);
        }
        let evaluation = policy_evaluation(&self.buffer, s.gamma, &s.solver)?;
        let projected = project_q(&evaluation.weights, s.eps_proj);
        let candidate = policy_improvement(&projected)?;
        self.fresh = 0;
        if s.memory == s.batch_size {
            self.buffer.clear();
        }
        let step = (candidate.0 - current.0).norm() / (1.0 + current.0.norm());
        let accepted = step <= s.trust_radius;
        if accepted {
            self.policy = Policy { gain: candidate, exploration: self.policy.exploration.decayed() };
            self.weights = Some(projected);
            self.iterations += 1;
        } else {
            self.rejected += 1;
        }
        Ok(Some(Improvement { evaluation, accepted }))
    }

    pub fn state(&self) -> LearnerState {
        LearnerState {
            gain: self.policy.gain.rows(),
            exploration: self.policy.exploration,
            iterations: self.iterations,
            weights: self.weights,
        }
    }

    /// Restores policy, exploration and iteration count. The experience
    /// buffer and the noise stream are not part of a checkpoint.
    pub fn restore(&mut self, state: &LearnerState) {
        self.policy = Policy { gain: FeedbackGain::from_rows(state.gain), exploration: state.exploration };
        self.iterations = state.iterations;
        self.weights = state.weights;
        self.buffer.clear();
        self.fresh = 0;
    }
}

/// Serializable snapshot of one phase learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerState {
    /// Rows of `G` (3×2); the policy is `u = −G·x`.
    pub gain: [[f64; 2]; 3],
    pub exploration: Exploration,
    pub iterations: usize,
    /// Projected Q weights from the latest evaluation, in basis order.
    pub weights: Option<QWeights>,
}

/// JSON checkpoint of all four learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerCheckpoint {
    pub version: u32,
    pub phases: PerPhase<LearnerState>,
}

impl LearnerCheckpoint {
    pub fn capture(learners: &PerPhase<PhaseLearner>) -> Self {
        LearnerCheckpoint { version: CHECKPOINT_VERSION, phases: learners.map(|_, l| l.state()) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let cp: LearnerCheckpoint = serde_json::from_str(s).map_err(|e| e.to_string())?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {}", cp.version));
        }
        Ok(cp)
    }
}
