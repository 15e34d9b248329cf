use super::FeatureError;
use crate::gait::{GaitPhase, PerPhase};
use crate::plant::{GaitFeatures, PhaseFeature, Side, Trajectory};

const DEFAULT_RAW_SMOOTHING: usize = 5;
const DEFAULT_PROMINENCE: f64 = 1.0;

fn malformed<T>(msg: impl Into<String>) -> Result<T, FeatureError> {
    Err(FeatureError::MalformedTrajectory(msg.into()))
}

/// Features of every annotated segment, in trajectory order.
///
/// The extremum search covers the segment plus its closing sample when the
/// trajectory has one; the duration is the segment length times `dt`.
pub fn extract_phase_features(traj: &Trajectory) -> Result<Vec<(GaitPhase, PhaseFeature)>, FeatureError> {
    if traj.segments.is_empty() {
        return malformed("no phase annotations");
    }
    let mut out = Vec::with_capacity(traj.segments.len());
    for seg in &traj.segments {
        if seg.end <= seg.start || seg.end > traj.len() {
            return malformed(format!("segment {} [{}, {}) out of range", seg.phase, seg.start, seg.end));
        }
        let last = seg.end.min(traj.len() - 1);
        let window = &traj.theta[seg.start..=last];
        let peak = if seg.phase.is_flexion() {
            window.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            window.iter().copied().fold(f64::INFINITY, f64::min)
        };
        out.push((seg.phase, PhaseFeature::new(peak, (seg.end - seg.start) as f64 * traj.dt)));
    }
    Ok(out)
}

/// Features of the first complete STF → SWE cycle.
///
/// Annotated trajectories are read segment by segment; raw trajectories are
/// segmented by [`extract_raw_features`] with a 5-sample smoother and a
/// 1-degree prominence floor.
pub fn extract_features(traj: &Trajectory) -> Result<GaitFeatures, FeatureError> {
    if !traj.is_annotated() {
        return extract_raw_features(traj, DEFAULT_RAW_SMOOTHING, DEFAULT_PROMINENCE);
    }
    let per_segment = extract_phase_features(traj)?;
    let start = per_segment
        .windows(4)
        .position(|w| w.iter().zip(GaitPhase::ALL).all(|((p, _), q)| *p == q))
        .ok_or_else(|| FeatureError::MalformedTrajectory("no complete STF..SWE cycle".into()))?;
    let cycle = &per_segment[start..start + 4];
    Ok(GaitFeatures::new(
        Side::Prosthesis,
        PerPhase::from_fn(|p| cycle[p.index()].1),
    ))
}

/// Centered moving average of odd width `window`; the window shrinks at the
/// ends so the output has the input's length.
pub fn centered_moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub kind: ExtremumKind,
    pub value: f64,
}

/// Alternating extrema of `x` from sign changes of its first difference,
/// keeping only swings of at least `prominence`.
pub fn detect_extrema(x: &[f64], prominence: f64) -> Vec<Extremum> {
    let mut candidates = Vec::new();
    let mut last_sign = 0.0f64;
    for i in 0..x.len().saturating_sub(1) {
        let d = x[i + 1] - x[i];
        if d == 0.0 {
            continue;
        }
        let sign = d.signum();
        if last_sign > 0.0 && sign < 0.0 {
            candidates.push(Extremum { index: i, kind: ExtremumKind::Max, value: x[i] });
        } else if last_sign < 0.0 && sign > 0.0 {
            candidates.push(Extremum { index: i, kind: ExtremumKind::Min, value: x[i] });
        }
        last_sign = sign;
    }

    let mut kept: Vec<Extremum> = Vec::new();
    for c in candidates {
        match kept.last_mut() {
            None => kept.push(c),
            Some(last) if last.kind == c.kind => {
                let better = match c.kind {
                    ExtremumKind::Max => c.value > last.value,
                    ExtremumKind::Min => c.value < last.value,
                };
                if better {
                    *last = c;
                }
            }
            Some(last) => {
                if (c.value - last.value).abs() >= prominence {
                    kept.push(c);
                }
            }
        }
    }
    kept
}

/// Segments a raw knee recording by its extrema.
///
/// A cycle is trough → stance peak → trough → swing peak → trough, with the
/// stance peak lower than the swing peak. Extrema are found on the smoothed
/// signal and then moved to the raw extreme within the smoothing half-width.
pub fn extract_raw_features(traj: &Trajectory, smoothing: usize, prominence: f64) -> Result<GaitFeatures, FeatureError> {
    if traj.len() < 3 {
        return malformed("too few samples");
    }
    let smoothed = centered_moving_average(&traj.theta, smoothing.max(1));
    let half = smoothing / 2;
    let extrema: Vec<Extremum> = detect_extrema(&smoothed, prominence)
        .into_iter()
        .map(|e| refine(&traj.theta, e, half))
        .collect();

    let maxima = extrema.iter().filter(|e| e.kind == ExtremumKind::Max).count();
    let minima = extrema.len() - maxima;
    if maxima < 2 || minima < 2 {
        return malformed(format!("found {maxima} maxima and {minima} minima"));
    }

    use ExtremumKind::{Max, Min};
    let pattern = [Min, Max, Min, Max, Min];
    let cycle = extrema
        .windows(5)
        .find(|w| w.iter().zip(pattern).all(|(e, k)| e.kind == k) && w[1].value < w[3].value)
        .ok_or_else(|| FeatureError::MalformedTrajectory("no trough-to-trough cycle with stance and swing peaks".into()))?;

    let feature = |from: &Extremum, to: &Extremum| PhaseFeature::new(to.value, (to.index - from.index) as f64 * traj.dt);
    Ok(GaitFeatures::new(
        Side::Intact,
        PerPhase {
            stf: feature(&cycle[0], &cycle[1]),
            ste: feature(&cycle[1], &cycle[2]),
            swf: feature(&cycle[2], &cycle[3]),
            swe: feature(&cycle[3], &cycle[4]),
        },
    ))
}

fn refine(raw: &[f64], e: Extremum, half: usize) -> Extremum {
    let lo = e.index.saturating_sub(half);
    let hi = (e.index + half).min(raw.len() - 1);
    let mut best = lo;
    for i in lo..=hi {
        let better = match e.kind {
            ExtremumKind::Max => raw[i] > raw[best],
            ExtremumKind::Min => raw[i] < raw[best],
        };
        if better {
            best = i;
        }
    }
    Extremum { index: best, kind: e.kind, value: raw[best] }
}
