use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ode::rk4_step;
use super::{GaitFeatures, PlantConfig, PlantError, Segment, Trajectory};
use crate::features::extract_features;
use crate::gait::{compute_torque, GaitPhase, ImpedanceSchedule, ImpedanceTriple, KneeState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseExit {
    /// Velocity changed sign after the required excursion.
    Extremum,
    /// Phase reached `max_phase_duration` without an exit event.
    DurationCap,
}

/// Raw result of integrating one phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRun {
    /// Noiseless angle samples from phase entry, excluding the exit sample.
    pub theta: Vec<f64>,
    /// State at the exit sample; `t` is the phase duration.
    pub exit_state: KneeState,
    pub exit: PhaseExit,
}

impl PhaseRun {
    pub fn duration(&self) -> f64 {
        self.exit_state.t
    }
}

/// Integrates `J·θ̈ = −(K·(θ − θe) + B·ω) + τ_load(t)` from `init` until the
/// phase exit event or the duration cap.
///
/// Flexion phases exit when ω crosses from positive to non-positive,
/// extension phases when it crosses from negative to non-negative; either
/// only counts once |θ − θ_entry| has exceeded `min_excursion`.
pub fn integrate_phase(
    imp: &ImpedanceTriple,
    phase: GaitPhase,
    init: KneeState,
    cfg: &PlantConfig,
) -> PhaseRun {
    let load = cfg.load[phase];
    let inertia = cfg.inertia;
    let h = cfg.dt / cfg.substeps as f64;
    let rhs = |t: f64, y: &[f64; 2]| {
        let torque = compute_torque(imp, &KneeState::new(y[0], y[1], t));
        [y[1], (load.at(t) - torque) / inertia]
    };
    let cap_steps = (cfg.max_phase_duration / cfg.dt).ceil() as usize;

    let entry = init.theta;
    let mut y = [init.theta, init.omega];
    let mut theta = vec![y[0]];
    let mut moved = false;
    for n in 1..=cap_steps {
        let prev_omega = y[1];
        for s in 0..cfg.substeps {
            let t = (n - 1) as f64 * cfg.dt + s as f64 * h;
            y = rk4_step(rhs, t, y, h);
            if y[0] < cfg.theta_range.min {
                y[0] = cfg.theta_range.min;
                y[1] = y[1].max(0.0);
            } else if y[0] > cfg.theta_range.max {
                y[0] = cfg.theta_range.max;
                y[1] = y[1].min(0.0);
            }
        }
        moved |= (y[0] - entry).abs() > cfg.min_excursion;
        let crossed = if phase.is_flexion() {
            prev_omega > 0.0 && y[1] <= 0.0
        } else {
            prev_omega < 0.0 && y[1] >= 0.0
        };
        let t = n as f64 * cfg.dt;
        if moved && crossed {
            return PhaseRun { theta, exit_state: KneeState::new(y[0], y[1], t), exit: PhaseExit::Extremum };
        }
        if n == cap_steps {
            return PhaseRun { theta, exit_state: KneeState::new(y[0], y[1], t), exit: PhaseExit::DurationCap };
        }
        theta.push(y[0]);
    }
    unreachable!("cap_steps is at least one")
}

/// [`integrate_phase`] with the duration cap reported as an error.
pub fn simulate_phase(
    imp: &ImpedanceTriple,
    phase: GaitPhase,
    init: KneeState,
    cfg: &PlantConfig,
) -> Result<PhaseRun, PlantError> {
    let run = integrate_phase(imp, phase, init, cfg);
    match run.exit {
        PhaseExit::Extremum => Ok(run),
        PhaseExit::DurationCap => Err(PlantError::NonTermination { phase, cap_s: cfg.max_phase_duration }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleOutput {
    /// Four annotated segments plus the closing sample of the next cycle.
    pub trajectory: Trajectory,
    pub features: GaitFeatures,
}

/// Prosthesis-side plant: carries the knee state across cycles and owns the
/// measurement-noise generator.
#[derive(Clone, Debug)]
pub struct KneePlant {
    cfg: PlantConfig,
    rng: ChaCha8Rng,
    state: KneeState,
}

impl KneePlant {
    pub fn new(cfg: PlantConfig, seed: u64) -> Result<Self, PlantError> {
        cfg.validate()?;
        let state = KneeState::new(cfg.initial_theta, 0.0, 0.0);
        Ok(KneePlant { cfg, rng: ChaCha8Rng::seed_from_u64(seed), state })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn state(&self) -> KneeState {
        self.state
    }

    /// Returns the knee to the trial's initial rest state.
    pub fn reset(&mut self) {
        self.state = KneeState::new(self.cfg.initial_theta, 0.0, 0.0);
    }

    /// Runs STF, STE, SWF, SWE from the previous cycle's exit state.
    ///
    /// On failure the knee state is left at the start of the failed cycle.
    pub fn simulate_cycle(&mut self, sched: &ImpedanceSchedule) -> Result<CycleOutput, PlantError> {
        let mut theta = Vec::new();
        let mut segments = Vec::with_capacity(4);
        let mut state = KneeState::new(self.state.theta, self.state.omega, 0.0);
        for phase in GaitPhase::ALL {
            let run = integrate_phase(sched.triple(phase), phase, state, &self.cfg);
            if run.exit == PhaseExit::DurationCap {
                return Err(PlantError::FailedCycle { phase });
            }
            let start = theta.len();
            theta.extend_from_slice(&run.theta);
            segments.push(Segment { phase, start, end: theta.len() });
            state = KneeState::new(run.exit_state.theta, run.exit_state.omega, 0.0);
        }
        theta.push(state.theta);
        self.state = state;

        if self.cfg.noise_sigma_theta > 0.0 {
            let noise = Normal::new(0.0, self.cfg.noise_sigma_theta).expect("validated sigma");
            for v in theta.iter_mut() {
                *v += noise.sample(&mut self.rng);
            }
        }
        let trajectory = Trajectory { dt: self.cfg.dt, t0: 0.0, theta, segments };
        let features = extract_features(&trajectory).map_err(|_| PlantError::FailedCycle {
            phase: GaitPhase::SwingExtension,
        })?;
        Ok(CycleOutput { trajectory, features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{PerPhase, Range};
    use crate::plant::LoadTorque;

    fn bare_cfg() -> PlantConfig {
        let mut cfg = PlantConfig::default();
        cfg.load = PerPhase::splat(LoadTorque::ZERO);
        cfg.noise_sigma_theta = 0.0;
        cfg.theta_range = Range::new(-1000.0, 1000.0);
        cfg
    }

    fn energy(cfg: &PlantConfig, imp: &ImpedanceTriple, theta: f64, omega: f64) -> f64 {
        0.5 * cfg.inertia * omega * omega + 0.5 * imp.k * (theta - imp.theta_e).powi(2)
    }

    #[test]
    fn equilibrium_start_stays_put_until_cap() {
        let cfg = bare_cfg();
        let imp = ImpedanceTriple::new(10.0, 0.5, 30.0);
        let run = integrate_phase(&imp, GaitPhase::StanceFlexion, KneeState::new(30.0, 0.0, 0.0), &cfg);
        assert_eq!(run.exit, PhaseExit::DurationCap);
        assert!(run.theta.iter().all(|&v| v == 30.0));
        assert!((run.duration() - cfg.max_phase_duration).abs() < 1e-9);
        let err = simulate_phase(&imp, GaitPhase::StanceFlexion, KneeState::new(30.0, 0.0, 0.0), &cfg);
        assert!(matches!(err, Err(PlantError::NonTermination { .. })));
    }

    #[test]
    fn undamped_phase_conserves_energy_and_matches_oscillator() {
        let cfg = bare_cfg();
        for k in [0.5, 2.0, 6.0, 10.0] {
            let imp = ImpedanceTriple::new(k, 0.0, 40.0);
            let init = KneeState::new(10.0, 0.0, 0.0);
            let run = simulate_phase(&imp, GaitPhase::SwingFlexion, init, &cfg).unwrap();
            let e0 = energy(&cfg, &imp, init.theta, init.omega);
            let e1 = energy(&cfg, &imp, run.exit_state.theta, run.exit_state.omega);
            assert!(((e1 - e0) / e0).abs() < 1e-6, "k={k} drift {}", (e1 - e0) / e0);
            // closed-form harmonic oscillator θ(t) = θe − 30·cos(ωn t)
            let wn = (k / cfg.inertia).sqrt();
            for (i, &th) in run.theta.iter().enumerate() {
                let t = i as f64 * cfg.dt;
                let exact = 40.0 - 30.0 * (wn * t).cos();
                assert!((th - exact).abs() < 1e-6, "k={k} i={i}");
            }
            // exits one sample after the analytic peak at t = π/ωn
            let t_peak = std::f64::consts::PI / wn;
            assert!(run.duration() >= t_peak && run.duration() < t_peak + cfg.dt + 1e-12);
        }
    }

    #[test]
    fn pure_damping_matches_first_order_response() {
        let cfg = bare_cfg();
        let (b, tau) = (1.0, 3.0);
        let mut cfg = cfg;
        cfg.load[GaitPhase::StanceFlexion] = LoadTorque { constant: tau, amplitude: 0.0, frequency_hz: 0.0 };
        let imp = ImpedanceTriple::new(0.0, b, 0.0);
        let run = integrate_phase(&imp, GaitPhase::StanceFlexion, KneeState::new(0.0, 0.0, 0.0), &cfg);
        // J·ω' = τ − B·ω  →  ω = (τ/B)(1 − e^{−Bt/J}),  θ = (τ/B)(t − (J/B)(1 − e^{−Bt/J}))
        let rate = b / cfg.inertia;
        let w_inf = tau / b;
        for (i, &th) in run.theta.iter().enumerate() {
            let t = i as f64 * cfg.dt;
            let exact = w_inf * (t - (1.0 - (-rate * t).exp()) / rate);
            assert!((th - exact).abs() <= 1e-6 * exact.abs().max(1.0), "i={i}");
        }
        let t = run.duration();
        let w_exact = w_inf * (1.0 - (-rate * t).exp());
        assert!((run.exit_state.omega - w_exact).abs() <= 1e-6 * w_exact);
        assert!((run.exit_state.omega - w_inf).abs() < 1e-6 * w_inf);
    }

    #[test]
    fn hard_stop_holds_range() {
        let mut cfg = PlantConfig::default();
        cfg.noise_sigma_theta = 0.0;
        cfg.load = PerPhase::splat(LoadTorque::ZERO);
        let imp = ImpedanceTriple::new(5.0, 0.05, 200.0);
        let run = integrate_phase(&imp, GaitPhase::SwingFlexion, KneeState::new(10.0, 0.0, 0.0), &cfg);
        assert_eq!(run.exit, PhaseExit::Extremum);
        assert!(run.theta.iter().all(|&v| v <= cfg.theta_range.max));
        assert_eq!(run.exit_state.theta, cfg.theta_range.max);
    }

    #[test]
    fn reference_cycle_is_deterministic_without_noise() {
        let mut cfg = PlantConfig::default();
        cfg.noise_sigma_theta = 0.0;
        let sched = crate::harness::ExperimentConfig::default().reference_schedule();
        let mut a = KneePlant::new(cfg.clone(), 1).unwrap();
        let mut b = KneePlant::new(cfg, 99).unwrap();
        let ca = a.simulate_cycle(&sched).unwrap();
        let cb = b.simulate_cycle(&sched).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let cfg = PlantConfig::default();
        assert!(cfg.noise_sigma_theta > 0.0);
        let sched = crate::harness::ExperimentConfig::default().reference_schedule();
        let run = |seed| {
            let mut p = KneePlant::new(cfg.clone(), seed).unwrap();
            (p.simulate_cycle(&sched).unwrap(), p.simulate_cycle(&sched).unwrap())
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7).0.trajectory, run(8).0.trajectory);
    }

    #[test]
    fn cycle_segments_tile_trajectory() {
        let cfg = PlantConfig::default();
        let sched = crate::harness::ExperimentConfig::default().reference_schedule();
        let mut p = KneePlant::new(cfg, 3).unwrap();
        let out = p.simulate_cycle(&sched).unwrap();
        let segs = &out.trajectory.segments;
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[0].start, 0);
        for w in segs.windows(2) {
            assert_eq!(w[0].end, w[1].start);
            assert_eq!(w[1].phase, w[0].phase.next());
        }
        assert_eq!(segs[3].end + 1, out.trajectory.len());
        let total = segs[3].end as f64 * out.trajectory.dt;
        assert!((out.features.cycle_duration() - total).abs() < 1e-9);
    }

    #[test]
    fn stiffness_shrinks_peak_deviation() {
        let mut cfg = PlantConfig::default();
        cfg.noise_sigma_theta = 0.0;
        for phase in GaitPhase::ALL {
            cfg.load[phase] = LoadTorque { constant: 15.0, amplitude: 0.0, frequency_hz: 0.0 };
        }
        let init = KneeState::new(20.0, 0.0, 0.0);
        let mut last = f64::INFINITY;
        for i in 0..12 {
            let k = 2.0 + 0.5 * i as f64;
            let imp = ImpedanceTriple::new(k, 0.1, 20.0);
            let run = simulate_phase(&imp, GaitPhase::StanceFlexion, init, &cfg).unwrap();
            let peak = run.theta.iter().cloned().fold(f64::MIN, f64::max);
            let dev = (peak - imp.theta_e).abs();
            assert!(dev < last, "k={k}: {dev} !< {last}");
            last = dev;
        }
    }

    #[test]
    fn damping_lengthens_phase() {
        let mut cfg = PlantConfig::default();
        cfg.noise_sigma_theta = 0.0;
        cfg.dt = 0.001;
        let init = KneeState::new(5.0, 0.0, 0.0);
        let mut last = 0.0;
        for i in 0..10 {
            let b = 0.02 + 0.03 * i as f64;
            let imp = ImpedanceTriple::new(3.0, b, 40.0);
            let run = simulate_phase(&imp, GaitPhase::SwingFlexion, init, &cfg).unwrap();
            assert!(run.duration() > last, "b={b}");
            last = run.duration();
        }
    }
}
