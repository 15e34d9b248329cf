use std::fs;
use std::path::Path;

use kneetrack::gait::{GaitPhase, PerPhase};
use kneetrack::harness::output::{read_trial_csv, summary_json, trial_csv_name, write_batch, write_trial_csv};
use kneetrack::harness::{
    run_batch, run_trial, run_trial_with, summarize, trial_rmse, trial_seed, BatchSummary, ExperimentConfig,
    TrialOptions, TrialRecord,
};
use kneetrack::plant::{KneePlant, PhaseFeature};
use kneetrack::rl::check_convergence;

fn small(trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.trials = trials;
    cfg
}

/// Config whose prosthesis already tracks a noiseless, fixed intact side
/// when started from the reference impedance.
fn already_tracking() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.plant.noise_sigma_theta = 0.0;
    cfg.modes.coadapt = false;
    cfg.rl.exploration.sigma_fraction = 0.0;
    cfg.rl.exploration.floor_fraction = 0.0;
    let mut plant = KneePlant::new(cfg.plant.clone(), 0).unwrap();
    // Second cycle: the first one starts from rest rather than the cycle's own exit state.
    plant.simulate_cycle(&cfg.reference_schedule()).unwrap();
    let f = plant.simulate_cycle(&cfg.reference_schedule()).unwrap().features;
    cfg.plant.intact_baseline = f.phases;
    cfg
}

#[test]
fn reference_start_converges_immediately() {
    let cfg = already_tracking();
    let opts = TrialOptions { initial_schedule: Some(cfg.reference_schedule()), ..Default::default() };
    let rec = run_trial_with(&cfg, 0, 1, &opts).unwrap().outcome.record;
    assert_eq!(rec.converged_at, Some(9), "rows: {:?}", rec.rows.iter().map(|r| (r.dp, r.dd)).collect::<Vec<_>>());
    assert!(rec.rows.iter().all(|r| r.dp.abs() <= 1.5));
}

#[test]
fn trial_is_deterministic() {
    let cfg = ExperimentConfig::default();
    let a = run_trial(&cfg, 3, 42).unwrap().record;
    let b = run_trial(&cfg, 3, 42).unwrap().record;
    assert_eq!(a, b);
}

#[test]
fn golden_default_trial() {
    let cfg = ExperimentConfig::default();
    let rec = run_trial(&cfg, 0, trial_seed(&cfg, 0)).unwrap().record;
    let at = rec.converged_at.expect("trial 0 converges");
    let rmse = trial_rmse(&rec).unwrap();
    for (p, r) in rmse.iter() {
        assert!(r.final_peak <= cfg.tolerance.peak_deg, "{p}: {}", r.final_peak);
    }
    let expected = fs::read_to_string(fixture("golden_trial_000.csv")).unwrap();
    let mut got = Vec::new();
    write_trial_csv(&mut got, &rec).unwrap();
    assert_eq!(String::from_utf8(got).unwrap(), expected, "golden trial changed (converged at {at})");
}

#[test]
fn trials_are_isolated() {
    let cfg = small(4);
    let all = run_batch(&cfg).unwrap().records;
    for j in 0..4 {
        let alone = run_trial(&cfg, j, trial_seed(&cfg, j)).unwrap().record;
        assert_eq!(alone, all[j]);
    }
}

#[test]
fn singleton_summary_is_the_trial() {
    let cfg = small(1);
    let res = run_batch(&cfg).unwrap();
    let rec = &res.records[0];
    let s = &res.summary;
    assert_eq!(s.trials, 1);
    let n = rec.converged_at.map(|k| k as f64 + 1.0);
    assert_eq!(s.mean_updates_to_convergence, n);
    assert_eq!(s.median_updates_to_convergence, n);
    assert_eq!(s.rmse, trial_rmse(rec).unwrap());
    assert_eq!(s.convergence_rate, if n.is_some() { 1.0 } else { 0.0 });
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Rebuilds the CSV-visible part of each record from a batch directory.
fn reload(dir: &Path, records: &[TrialRecord]) -> Vec<TrialRecord> {
    records
        .iter()
        .map(|orig| {
            let text = fs::read(dir.join(trial_csv_name(orig.trial))).unwrap();
            let rows: Vec<_> = read_trial_csv(text.as_slice()).unwrap().into_iter().map(|(_, r)| r).collect();
            let converged_at = rows.iter().find(|r| r.converged).map(|r| r.update);
            TrialRecord { rows, converged_at, ..orig.clone() }
        })
        .collect()
}

fn targets_from_csv(dir: &Path) -> Vec<Vec<PerPhase<PhaseFeature>>> {
    let mut rdr = csv::Reader::from_path(dir.join("targets.csv")).unwrap();
    let mut out: Vec<Vec<PerPhase<PhaseFeature>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (trial, update): (usize, usize) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        let phase: GaitPhase = rec[2].parse().unwrap();
        let f = PhaseFeature::new(rec[3].parse().unwrap(), rec[4].parse().unwrap());
        if out.len() <= trial {
            out.resize(trial + 1, Vec::new());
        }
        if out[trial].len() <= update {
            out[trial].resize(update + 1, PerPhase::splat(PhaseFeature::new(0.0, 0.0)));
        }
        out[trial][update][phase] = f;
    }
    out
}

#[test]
fn summary_and_convergence_replay_from_csv() {
    let cfg = small(6);
    let res = run_batch(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_batch(dir.path(), &cfg, &res.records, &res.summary).unwrap();

    let reloaded = reload(dir.path(), &res.records);
    let recomputed: BatchSummary = summarize(&reloaded);
    let emitted = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(summary_json(&recomputed), emitted);

    let targets = targets_from_csv(dir.path());
    for rec in &reloaded {
        let Some(at) = rec.converged_at else { continue };
        let cycle = |k: usize| GaitPhase::ALL.iter().map(|&p| targets[rec.trial][k][p].duration).sum::<f64>();
        for p in GaitPhase::ALL {
            let states: Vec<_> = rec.phase_rows(p).take(at + 1).map(|r| r.state(cycle(r.update))).collect();
            assert!(check_convergence(&states, cfg.tolerance.peak_deg, cfg.tolerance.duration_fraction));
        }
        // and not one update earlier
        let earlier = GaitPhase::ALL.iter().all(|&p| {
            let states: Vec<_> = rec.phase_rows(p).take(at).map(|r| r.state(cycle(r.update))).collect();
            check_convergence(&states, cfg.tolerance.peak_deg, cfg.tolerance.duration_fraction)
        });
        assert!(!earlier, "trial {} converged before {at}", rec.trial);
    }
}

#[test]
fn update_indices_are_contiguous() {
    let cfg = small(3);
    for rec in run_batch(&cfg).unwrap().records {
        for (i, chunk) in rec.rows.chunks(4).enumerate() {
            assert!(chunk.iter().all(|r| r.update == i));
            assert_eq!(chunk.iter().map(|r| r.phase).collect::<Vec<_>>(), GaitPhase::ALL.to_vec());
        }
        assert_eq!(rec.targets.len(), rec.updates());
    }
}
