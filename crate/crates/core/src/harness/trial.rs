use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig, InitialPolicy, TuningMode};
use super::seeds::{derive_seed, STREAM_INIT, STREAM_INTACT, STREAM_LEARNER, STREAM_PLANT, STREAM_POLICY};
use crate::features::{average_features, compute_state, extract_raw_features, TargetTracker, TrackingState};
use crate::gait::{apply_action, Action, GaitPhase, ImpedanceSchedule, ImpedanceTriple, PerPhase};
use crate::plant::{GaitFeatures, IntactKnee, KneePlant, PhaseFeature};
use crate::rl::{check_convergence, FeedbackGain, LearnerCheckpoint, PhaseLearner, Policy};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One CSV row: a single phase at a single impedance update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub update: usize,
    pub phase: GaitPhase,
    /// Peak error, deg.
    pub dp: f64,
    /// Duration error, s.
    pub dd: f64,
    /// Duration error, % of the target cycle.
    pub dd_pct: f64,
    /// Impedance in effect during this update's cycle(s).
    pub impedance: ImpedanceTriple,
    /// Increment applied after this update (post clamping).
    pub action: Action,
    /// Stage cost `U(x, u)` of this update.
    pub cost: f64,
    /// True on the update at which the trial met the convergence rule.
    pub converged: bool,
}

impl UpdateRow {
    pub fn state(&self, cycle_duration: f64) -> TrackingState {
        TrackingState { phase: self.phase, dp: self.dp, dd: self.dd, cycle_duration }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Four rows (STF, STE, SWF, SWE) per update, updates contiguous from 0.
    pub rows: Vec<UpdateRow>,
    pub converged_at: Option<usize>,
    pub failed_cycles: usize,
    pub aborted: bool,
    /// Intact-side target in effect at each update.
    pub targets: Vec<PerPhase<PhaseFeature>>,
    /// Policy iterations completed per phase.
    pub policy_iterations: PerPhase<usize>,
    pub final_schedule: ImpedanceSchedule,
}

impl TrialRecord {
    pub fn updates(&self) -> usize {
        self.rows.len() / 4
    }

    /// Rows of one phase in update order.
    pub fn phase_rows(&self, phase: GaitPhase) -> impl Iterator<Item = &UpdateRow> {
        self.rows.iter().filter(move |r| r.phase == phase)
    }
}

/// Everything a trial produces, including the final learner state.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub checkpoint: LearnerCheckpoint,
}

/// Samples each impedance parameter uniformly on `[(1 − s)·ref, (1 + s)·ref]`
/// and clamps it to the phase bounds.
pub fn sample_initial_schedule<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> ImpedanceSchedule {
    let s = cfg.init_spread;
    let mut draw = |v: f64| if s > 0.0 { v * rng.random_range((1.0 - s)..=(1.0 + s)) } else { v };
    let phases = PerPhase::from_fn(|p| {
        let r = cfg.reference[p];
        let raw = ImpedanceTriple::new(draw(r.k), draw(r.b), draw(r.theta_e));
        cfg.impedance_bounds[p].clamp(raw).0
    });
    ImpedanceSchedule::new(phases)
}

fn initial_gains<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> PerPhase<FeedbackGain> {
    let shipped = cfg.rl.initial_gain();
    match cfg.modes.initial_policy {
        InitialPolicy::Shipped => shipped,
        InitialPolicy::Random { spread } => shipped.map(|_, g| {
            let mut g = *g;
            for v in g.0.iter_mut() {
                if spread > 0.0 {
                    *v *= rng.random_range((1.0 - spread)..=(1.0 + spread));
                }
            }
            g
        }),
    }
}

fn build_learners(cfg: &ExperimentConfig, trial_seed: u64, gains: &PerPhase<FeedbackGain>) -> Result<PerPhase<PhaseLearner>, ConfigError> {
    let cost = cfg.rl.cost()?;
    let exploration = cfg.rl.exploration();
    let settings = cfg.rl.learner_settings();
    Ok(PerPhase::from_fn(|p| {
        PhaseLearner::new(
            p,
            cost,
            settings,
            Policy { gain: gains[p], exploration },
            derive_seed(trial_seed, STREAM_LEARNER + p.index() as u64),
        )
    }))
}

/// Optional knobs for [`run_trial_with`].
#[derive(Clone, Debug, Default)]
pub struct TrialOptions {
    /// Overrides the initial schedule instead of sampling it.
    pub initial_schedule: Option<ImpedanceSchedule>,
    /// Starts the learners from a checkpoint.
    pub resume: Option<LearnerCheckpoint>,
    /// Keeps every prosthesis trajectory (for export).
    pub keep_trajectories: bool,
}

/// Result of [`run_trial_with`]: the outcome and, when requested, the
/// prosthesis trajectory of each successful cycle.
pub struct TrialRun {
    pub outcome: TrialOutcome,
    pub trajectories: Vec<crate::plant::Trajectory>,
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize, trial_seed: u64) -> Result<TrialOutcome, TrialError> {
    run_trial_with(cfg, trial, trial_seed, &TrialOptions::default()).map(|r| r.outcome)
}

/// One tuning session: measure, compare against the intact target, act,
/// learn, until the convergence rule holds or `max_updates` is reached.
///
/// Aborted trials are returned as records with `aborted = true`; the error
/// path is reserved for configuration problems.
pub fn run_trial_with(cfg: &ExperimentConfig, trial: usize, trial_seed: u64, opts: &TrialOptions) -> Result<TrialRun, TrialError> {
    cfg.validate()?;
    let plant_cfg = cfg.effective_plant();
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, STREAM_INIT));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, STREAM_POLICY));

    let mut sched = match opts.initial_schedule {
        Some(s) => s,
        None => sample_initial_schedule(cfg, &mut init_rng),
    };
    let mut plant = KneePlant::new(plant_cfg.clone(), derive_seed(trial_seed, STREAM_PLANT))
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut intact = IntactKnee::new(&plant_cfg, derive_seed(trial_seed, STREAM_INTACT));
    let mut tracker = TargetTracker::new(cfg.features.clone());
    let mut learners = build_learners(cfg, trial_seed, &initial_gains(cfg, &mut policy_rng))?;
    if let Some(cp) = &opts.resume {
        for p in GaitPhase::ALL {
            learners[p].restore(&cp.phases[p]);
        }
    }

    let bounds = cfg.rl.action_bounds;
    let tol_p = cfg.tolerance.peak_deg;
    let tol_d = cfg.tolerance.duration_fraction;
    let cadence = cfg.features.cadence;

    let mut history: PerPhase<Vec<TrackingState>> = PerPhase::default();
    let mut pending: PerPhase<Option<(Vector2<f64>, Action)>> = PerPhase::default();
    let mut previous_sched: Option<ImpedanceSchedule> = None;
    let mut active = GaitPhase::StanceFlexion;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut trajectories = Vec::new();
    let mut converged_at = None;
    let mut failed_cycles = 0;
    let mut consecutive_failures = 0;
    let mut aborted = false;
    let mut last_intact: Option<GaitFeatures> = None;

    let mut update = 0;
    while update < cfg.max_updates {
        // Measure `cadence` cycles on both sides.
        let mut prosthesis = Vec::with_capacity(cadence);
        let mut measured = Vec::with_capacity(cadence);
        let mut failed = false;
        for _ in 0..cadence {
            match plant.simulate_cycle(&sched) {
                Ok(out) => {
                    if opts.keep_trajectories {
                        trajectories.push(out.trajectory);
                    }
                    prosthesis.push(out.features);
                }
                Err(_) => {
                    failed = true;
                    break;
                }
            }
            let recording = intact.record(&plant_cfg);
            if let Ok(f) = extract_raw_features(&recording, cfg.features.raw_smoothing, cfg.features.prominence) {
                measured.push(f);
            }
        }
        if failed {
            failed_cycles += 1;
            consecutive_failures += 1;
            if consecutive_failures >= cfg.max_failed_cycles {
                aborted = true;
                break;
            }
            // Undo the update that led here and restart from rest.
            if let Some(prev) = previous_sched {
                sched = prev;
            }
            plant.reset();
            pending = PerPhase::default();
            if let InitialPolicy::Random { .. } = cfg.modes.initial_policy {
                let gains = initial_gains(cfg, &mut policy_rng);
                for p in GaitPhase::ALL {
                    if learners[p].iterations() == 0 {
                        learners[p].set_gain(gains[p]);
                    }
                }
            }
            continue;
        }
        consecutive_failures = 0;

        let prosthesis = average_features(&prosthesis).expect("cadence ≥ 1");
        if let Some(m) = average_features(&measured) {
            last_intact = Some(m);
        }
        let measured = match last_intact {
            Some(m) => m,
            // Only reachable if the very first intact recording is unusable.
            None => GaitFeatures::new(crate::plant::Side::Intact, plant_cfg.intact_baseline),
        };
        let target = tracker.update(&measured);
        targets.push(target.phases);
        if plant_cfg.adapt_rate > 0.0 {
            intact.adapt(&prosthesis, &plant_cfg);
        }

        let states = PerPhase::from_fn(|p| compute_state(&prosthesis, &target, p));
        for p in GaitPhase::ALL {
            history[p].push(states[p]);
            let x = Vector2::from(states[p].as_vector());
            if let Some((x_prev, u_prev)) = pending[p].take() {
                learners[p].record(&x_prev, &u_prev, &x);
                // Evaluation failures keep the batch for a later attempt.
                let _ = learners[p].improve_if_ready();
            }
        }

        let converged = GaitPhase::ALL.iter().all(|&p| check_convergence(&history[p], tol_p, tol_d));
        let acting: PerPhase<bool> = if converged {
            PerPhase::splat(false)
        } else {
            match cfg.modes.tuning {
                TuningMode::Simultaneous => PerPhase::splat(true),
                TuningMode::Sequential => {
                    if states[active].within(tol_p, tol_d) {
                        if let Some(next) = next_out_of_tolerance(active, &states, tol_p, tol_d) {
                            active = next;
                        }
                    }
                    PerPhase::from_fn(|p| p == active && !states[p].within(tol_p, tol_d))
                }
            }
        };

        let mut next_sched = sched;
        for p in GaitPhase::ALL {
            let x = Vector2::from(states[p].as_vector());
            let u = if acting[p] { learners[p].act(&x, &bounds) } else { Action::ZERO };
            let outcome = apply_action(&next_sched, p, &u, &cfg.impedance_bounds[p]);
            next_sched = outcome.schedule;
            if acting[p] {
                pending[p] = Some((x, outcome.applied));
            }
            rows.push(UpdateRow {
                update,
                phase: p,
                dp: states[p].dp,
                dd: states[p].dd,
                dd_pct: states[p].dd_percent(),
                impedance: sched.phases[p],
                action: outcome.applied,
                cost: learners[p].stage_cost(&x, &outcome.applied),
                converged,
            });
        }
        next_sched.cycle = sched.cycle + 1;
        previous_sched = Some(sched);
        sched = next_sched;
        update += 1;
        if converged {
            converged_at = Some(update - 1);
            break;
        }
    }

    let record = TrialRecord {
        trial,
        seed: trial_seed,
        rows,
        converged_at,
        failed_cycles,
        aborted,
        targets,
        policy_iterations: learners.map(|_, l| l.iterations()),
        final_schedule: sched,
    };
    Ok(TrialRun {
        outcome: TrialOutcome { record, checkpoint: LearnerCheckpoint::capture(&learners) },
        trajectories,
    })
}

fn next_out_of_tolerance(
    from: GaitPhase,
    states: &PerPhase<TrackingState>,
    tol_p: f64,
    tol_d: f64,
) -> Option<GaitPhase> {
    let mut p = from.next();
    for _ in 0..4 {
        if !states[p].within(tol_p, tol_d) {
            return Some(p);
        }
        p = p.next();
    }
    None
}
