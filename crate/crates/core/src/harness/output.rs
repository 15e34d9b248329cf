//! File formats.
//!
//! A batch directory holds `trial_NNN.csv` per trial, `targets.csv` with the
//! intact-side target per update, `summary.json` and `config.toml` (the
//! exact configuration that produced the run). Floats are written in
//! shortest round-trip form so every file re-parses to the same values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use super::config::ExperimentConfig;
use super::metrics::BatchSummary;
use super::trial::{TrialRecord, UpdateRow};
use crate::gait::{Action, GaitPhase, ImpedanceTriple};
use crate::plant::{Segment, Trajectory};

pub const TRIAL_CSV_HEADER: [&str; 14] = [
    "trial", "update", "phase", "dP_deg", "dD_s", "dD_pct", "K", "B", "theta_e", "dK", "dB", "dtheta_e", "cost", "converged",
];

pub const TARGET_CSV_HEADER: [&str; 5] = ["trial", "update", "phase", "peak_deg", "duration_s"];

pub const TRAJECTORY_CSV_HEADER: [&str; 6] = ["trial", "cycle", "sample", "t", "theta", "phase"];

pub fn trial_csv_name(trial: usize) -> String {
    format!("trial_{trial:03}.csv")
}

pub fn write_trial_csv<W: Write>(w: W, record: &TrialRecord) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRIAL_CSV_HEADER)?;
    for r in &record.rows {
        csv.write_record([
            record.trial.to_string(),
            r.update.to_string(),
            r.phase.label().to_string(),
            r.dp.to_string(),
            r.dd.to_string(),
            r.dd_pct.to_string(),
            r.impedance.k.to_string(),
            r.impedance.b.to_string(),
            r.impedance.theta_e.to_string(),
            r.action.dk.to_string(),
            r.action.db.to_string(),
            r.action.dtheta_e.to_string(),
            r.cost.to_string(),
            u8::from(r.converged).to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Rows of a trial CSV as `(trial, row)` pairs.
pub fn read_trial_csv<R: Read>(r: R) -> Result<Vec<(usize, UpdateRow)>> {
    let mut csv = csv::Reader::from_reader(r);
    if csv.headers()?.iter().ne(TRIAL_CSV_HEADER) {
        bail!("unexpected trial CSV header");
    }
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().with_context(|| format!("column {}", TRIAL_CSV_HEADER[i])) };
        let converged = match &rec[13] {
            "0" => false,
            "1" => true,
            other => bail!("converged must be 0 or 1, got {other:?}"),
        };
        out.push((
            rec[0].parse()?,
            UpdateRow {
                update: rec[1].parse()?,
                phase: rec[2].parse::<GaitPhase>().map_err(anyhow::Error::msg)?,
                dp: f(3)?,
                dd: f(4)?,
                dd_pct: f(5)?,
                impedance: ImpedanceTriple::new(f(6)?, f(7)?, f(8)?),
                action: Action::new(f(9)?, f(10)?, f(11)?),
                cost: f(12)?,
                converged,
            },
        ));
    }
    Ok(out)
}

pub fn write_targets_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TARGET_CSV_HEADER)?;
    for rec in records {
        for (k, target) in rec.targets.iter().enumerate() {
            for (p, f) in target.iter() {
                csv.write_record([rec.trial.to_string(), k.to_string(), p.label().into(), f.peak.to_string(), f.duration.to_string()])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Writes one trajectory per `(trial, cycle)` key. Unannotated samples get
/// an empty phase column.
pub fn write_trajectory_csv<W: Write>(w: W, trajectories: &[(usize, usize, &Trajectory)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRAJECTORY_CSV_HEADER)?;
    for &(trial, cycle, traj) in trajectories {
        let phases = traj.sample_phases();
        for (i, theta) in traj.theta.iter().enumerate() {
            let label = phases[i].map_or("", |p| p.label());
            csv.write_record([
                trial.to_string(),
                cycle.to_string(),
                i.to_string(),
                traj.time(i).to_string(),
                theta.to_string(),
                label.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Parsed trajectory CSV, one entry per `(trial, cycle)` in file order.
///
/// In an annotated trajectory the final run of equal labels is taken as the
/// closing sample(s) of the last segment, matching what the writer emits.
pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<(usize, usize, Trajectory)>> {
    let mut csv = csv::Reader::from_reader(r);
    if csv.headers()?.iter().ne(TRAJECTORY_CSV_HEADER) {
        bail!("unexpected trajectory CSV header");
    }
    struct Group {
        key: (usize, usize),
        t: Vec<f64>,
        theta: Vec<f64>,
        phase: Vec<Option<GaitPhase>>,
    }
    let mut groups: Vec<Group> = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let key = (rec[0].parse()?, rec[1].parse()?);
        let phase = match rec[5].trim() {
            "" => None,
            s => Some(s.parse::<GaitPhase>().map_err(anyhow::Error::msg)?),
        };
        if groups.last().map_or(true, |g| g.key != key) {
            groups.push(Group { key, t: Vec::new(), theta: Vec::new(), phase: Vec::new() });
        }
        let g = groups.last_mut().expect("just pushed");
        g.t.push(rec[3].parse()?);
        g.theta.push(rec[4].parse()?);
        g.phase.push(phase);
    }

    groups
        .into_iter()
        .map(|g| {
            if g.t.len() < 2 {
                bail!("trajectory {:?} needs at least two samples", g.key);
            }
            let dt = (g.t[g.t.len() - 1] - g.t[0]) / (g.t.len() - 1) as f64;
            if !(dt > 0.0) {
                bail!("trajectory {:?} has non-increasing time", g.key);
            }
            let segments = segments_from_labels(&g.phase)?;
            Ok((g.key.0, g.key.1, Trajectory { dt, t0: g.t[0], theta: g.theta, segments }))
        })
        .collect()
}

fn segments_from_labels(labels: &[Option<GaitPhase>]) -> Result<Vec<Segment>> {
    if labels.iter().all(Option::is_none) {
        return Ok(Vec::new());
    }
    if labels.iter().any(Option::is_none) {
        bail!("phase column must be filled for every sample or for none");
    }
    let mut runs: Vec<(GaitPhase, usize)> = Vec::new();
    for (i, p) in labels.iter().enumerate() {
        let p = p.expect("checked");
        if runs.last().map_or(true, |&(q, _)| q != p) {
            runs.push((p, i));
        }
    }
    // The last run only closes the segment before it.
    Ok(runs.windows(2).map(|w| Segment { phase: w[0].0, start: w[0].1, end: w[1].1 }).collect())
}

/// Writes every batch artifact into `dir`, creating it if needed.
pub fn write_batch(dir: &Path, cfg: &ExperimentConfig, records: &[TrialRecord], summary: &BatchSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    for rec in records {
        let mut buf = Vec::new();
        write_trial_csv(&mut buf, rec)?;
        put(&trial_csv_name(rec.trial), buf)?;
    }
    let mut buf = Vec::new();
    write_targets_csv(&mut buf, records)?;
    put("targets.csv", buf)?;
    put("summary.json", summary_json(summary).into_bytes())?;
    put("config.toml", cfg.to_toml_string().into_bytes())?;
    Ok(written)
}

pub fn summary_json(summary: &BatchSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_runs_become_segments() {
        use GaitPhase::*;
        let labels: Vec<_> = [StanceFlexion, StanceFlexion, StanceExtension, SwingFlexion, SwingFlexion, SwingExtension, StanceFlexion]
            .into_iter()
            .map(Some)
            .collect();
        let segs = segments_from_labels(&labels).unwrap();
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[0], Segment { phase: StanceFlexion, start: 0, end: 2 });
        assert_eq!(segs[3], Segment { phase: SwingExtension, start: 5, end: 6 });
        assert!(segments_from_labels(&[None, None]).unwrap().is_empty());
        assert!(segments_from_labels(&[None, Some(StanceFlexion)]).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let traj = Trajectory {
            dt: 0.01,
            t0: 0.0,
            theta: vec![1.0, 2.5, 3.0, 2.0, 1.0, 0.5, 0.25],
            segments: vec![
                Segment { phase: GaitPhase::StanceFlexion, start: 0, end: 3 },
                Segment { phase: GaitPhase::StanceExtension, start: 3, end: 6 },
            ],
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[(2, 5, &traj)]).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        let (trial, cycle, t) = &back[0];
        assert_eq!((*trial, *cycle), (2, 5));
        assert_eq!(t.theta, traj.theta);
        assert_eq!(t.segments, traj.segments);
        assert!((t.dt - 0.01).abs() < 1e-12);
    }
}
