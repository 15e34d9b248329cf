use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trial::TrialRecord;
use crate::gait::{GaitPhase, PerPhase};

#[derive(Debug, Error, PartialEq)]
#[error("need at least {need} entries, have {have}")]
pub struct InsufficientData {
    pub have: usize,
    pub need: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    First,
    Last,
}

/// Root mean square of the first or last `n` entries.
pub fn compute_rmse(errors: &[f64], window: Window, n: usize) -> Result<f64, InsufficientData> {
    if n == 0 || errors.len() < n {
        return Err(InsufficientData { have: errors.len(), need: n.max(1) });
    }
    let slice = match window {
        Window::First => &errors[..n],
        Window::Last => &errors[errors.len() - n..],
    };
    Ok((slice.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt())
}

/// Entries at the start and end of a trial that the summary compares.
pub const RMSE_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseRmse {
    /// Peak error RMSE, deg.
    pub initial_peak: f64,
    pub final_peak: f64,
    /// Duration error RMSE, % of cycle.
    pub initial_duration_pct: f64,
    pub final_duration_pct: f64,
}

/// Initial/final RMSE of one trial, or `None` if it has fewer than
/// [`RMSE_WINDOW`] updates.
pub fn trial_rmse(record: &TrialRecord) -> Option<PerPhase<PhaseRmse>> {
    if record.updates() < RMSE_WINDOW {
        return None;
    }
    Some(PerPhase::from_fn(|p| {
        let dp: Vec<f64> = record.phase_rows(p).map(|r| r.dp).collect();
        let dd: Vec<f64> = record.phase_rows(p).map(|r| r.dd_pct).collect();
        let rmse = |v: &[f64], w| compute_rmse(v, w, RMSE_WINDOW).expect("length checked");
        PhaseRmse {
            initial_peak: rmse(&dp, Window::First),
            final_peak: rmse(&dp, Window::Last),
            initial_duration_pct: rmse(&dd, Window::First),
            final_duration_pct: rmse(&dd, Window::Last),
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub converged: usize,
    pub aborted: usize,
    pub convergence_rate: f64,
    /// Over converged trials; `None` if none converged.
    pub mean_updates_to_convergence: Option<f64>,
    pub median_updates_to_convergence: Option<f64>,
    /// Trials contributing to `rmse` (those with at least 10 updates).
    pub rmse_trials: usize,
    /// Per-phase mean over trials of each trial's RMSE.
    pub rmse: PerPhase<PhaseRmse>,
    pub failed_cycles: usize,
}

/// Updates needed to converge: converged-at index plus one.
pub fn updates_to_convergence(record: &TrialRecord) -> Option<usize> {
    record.converged_at.map(|k| k + 1)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn summarize(records: &[TrialRecord]) -> BatchSummary {
    let trials = records.len();
    let mut counts: Vec<f64> = records.iter().filter_map(updates_to_convergence).map(|n| n as f64).collect();
    counts.sort_by(f64::total_cmp);
    let converged = counts.len();
    let (mean, med) = if counts.is_empty() {
        (None, None)
    } else {
        (Some(counts.iter().sum::<f64>() / converged as f64), Some(median(&counts)))
    };

    let per_trial: Vec<PerPhase<PhaseRmse>> = records.iter().filter_map(trial_rmse).collect();
    let m = per_trial.len() as f64;
    let rmse = PerPhase::from_fn(|p: GaitPhase| {
        if per_trial.is_empty() {
            return PhaseRmse::default();
        }
        let avg = |f: fn(&PhaseRmse) -> f64| per_trial.iter().map(|t| f(&t[p])).sum::<f64>() / m;
        PhaseRmse {
            initial_peak: avg(|r| r.initial_peak),
            final_peak: avg(|r| r.final_peak),
            initial_duration_pct: avg(|r| r.initial_duration_pct),
            final_duration_pct: avg(|r| r.final_duration_pct),
        }
    });

    BatchSummary {
        trials,
        converged,
        aborted: records.iter().filter(|r| r.aborted).count(),
        convergence_rate: if trials == 0 { 0.0 } else { converged as f64 / trials as f64 },
        mean_updates_to_convergence: mean,
        median_updates_to_convergence: med,
        rmse_trials: per_trial.len(),
        rmse,
        failed_cycles: records.iter().map(|r| r.failed_cycles).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(compute_rmse(&[3.0; 10], Window::First, 10), Ok(3.0));
        assert_eq!(compute_rmse(&[0.0; 12], Window::Last, 10), Ok(0.0));
        let r = compute_rmse(&[3.0, 4.0], Window::Last, 2).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(compute_rmse(&[1.0; 9], Window::First, 10), Err(InsufficientData { have: 9, need: 10 }));
    }

    #[test]
    fn windows_pick_the_right_end() {
        let v: Vec<f64> = (0..12).map(|i| if i < 2 { 10.0 } else { 0.0 }).collect();
        assert!(compute_rmse(&v, Window::First, 10).unwrap() > 0.0);
        assert_eq!(compute_rmse(&v, Window::Last, 10), Ok(0.0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 9.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 9.0]), 3.0);
    }
}
