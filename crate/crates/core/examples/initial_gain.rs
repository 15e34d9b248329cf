//! Derives per-phase starting gains for `rl.initial_gain`.
//!
//! Linearizes the noise-free plant around the reference schedule by central
//! differences, then solves the Riccati equation for `x' = x + J·u` with the
//! configured cost weights. The shipped gain is a fraction of that solution:
//! the linearization is only local and the intact target sits away from the
//! reference, so a full Riccati step overshoots.
//!
//! ```text
//! cargo run --release --example initial_gain [config.toml]
//! ```

use kneetrack::gait::{GaitPhase, ImpedanceSchedule};
use kneetrack::harness::ExperimentConfig;
use kneetrack::plant::linear::solve_dare;
use kneetrack::plant::{GaitFeatures, KneePlant};
use nalgebra::{Matrix2, Matrix2x3};

const CONSERVATIVE: f64 = 0.3;

fn settle(cfg: &ExperimentConfig, sched: &ImpedanceSchedule) -> GaitFeatures {
    let mut plant_cfg = cfg.plant.clone();
    plant_cfg.noise_sigma_theta = 0.0;
    let mut plant = KneePlant::new(plant_cfg, 0).expect("valid plant");
    let mut last = None;
    for _ in 0..6 {
        last = Some(plant.simulate_cycle(sched).expect("reference schedule completes").features);
    }
    last.expect("at least one cycle")
}

fn main() {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref()).expect("config loads"),
        None => ExperimentConfig::default(),
    };
    let reference = cfg.reference_schedule();
    let base = settle(&cfg, &reference);
    println!("reference features:");
    for (p, f) in base.phases.iter() {
        println!("  {p}: peak {:.3} deg, duration {:.3} s", f.peak, f.duration);
    }
    let rx = Matrix2::from_fn(|i, j| cfg.rl.rx[i][j]);
    let ru = cfg.rl.cost().expect("valid cost").ru().to_owned();
    let steps = [0.5, 0.1, 3.0];

    println!("\n[rl.initial_gain]");
    for phase in GaitPhase::ALL {
        let mut jac = Matrix2x3::zeros();
        for (c, h) in steps.iter().enumerate() {
            let shifted = |sign: f64| {
                let mut s = reference;
                let mut v = s.phases[phase].as_array();
                v[c] += sign * h;
                s.phases[phase] = kneetrack::gait::ImpedanceTriple::from_array(v);
                settle(&cfg, &s).phases[phase]
            };
            let (hi, lo) = (shifted(1.0), shifted(-1.0));
            jac[(0, c)] = (hi.peak - lo.peak) / (2.0 * h);
            jac[(1, c)] = (hi.duration - lo.duration) / (2.0 * h);
        }
        eprintln!("{phase} J = {jac:.4}");
        let sol = solve_dare(&Matrix2::identity(), &jac, &rx, &ru, cfg.rl.gamma, 1e-12, 100_000).expect("dare converges");
        let g = sol.gain * CONSERVATIVE;
        println!(
            "{} = [[{:.4}, {:.4}], [{:.4}, {:.4}], [{:.4}, {:.4}]]",
            phase.label(),
            g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)], g[(2, 0)], g[(2, 1)]
        );
    }
}
