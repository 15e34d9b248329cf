use super::FeatureExtractorConfig;
use crate::gait::{GaitPhase, PerPhase};
use crate::plant::{GaitFeatures, PhaseFeature};

/// Mean of the most recent `min(window, len)` values.
///
/// # Panics
///
/// If `history` is empty or `window` is zero.
pub fn smooth_target(history: &[f64], window: usize) -> f64 {
    assert!(!history.is_empty() && window > 0, "smooth_target needs data");
    let n = window.min(history.len());
    history[history.len() - n..].iter().sum::<f64>() / n as f64
}

/// Keeps `current` unless `candidate` differs from it by more than `threshold`.
pub fn threshold_update(current: f64, candidate: f64, threshold: f64) -> f64 {
    if (candidate - current).abs() > threshold {
        candidate
    } else {
        current
    }
}

/// Per-phase mean of several feature sets (aggregation over cycles).
pub fn average_features(samples: &[GaitFeatures]) -> Option<GaitFeatures> {
    let first = samples.first()?;
    let n = samples.len() as f64;
    let phases = PerPhase::from_fn(|p| {
        let peak = samples.iter().map(|s| s.phases[p].peak).sum::<f64>() / n;
        let duration = samples.iter().map(|s| s.phases[p].duration).sum::<f64>() / n;
        PhaseFeature::new(peak, duration)
    });
    Some(GaitFeatures::new(first.side, phases))
}

/// Running target built from intact-side measurements: each feature is the
/// moving average of its history, and the published target only moves when
/// that average departs from it by more than the threshold.
#[derive(Clone, Debug)]
pub struct TargetTracker {
    cfg: FeatureExtractorConfig,
    peaks: PerPhase<Vec<f64>>,
    durations: PerPhase<Vec<f64>>,
    target: Option<GaitFeatures>,
}

impl TargetTracker {
    pub fn new(cfg: FeatureExtractorConfig) -> Self {
        TargetTracker { cfg, peaks: PerPhase::default(), durations: PerPhase::default(), target: None }
    }

    pub fn target(&self) -> Option<&GaitFeatures> {
        self.target.as_ref()
    }

    pub fn update(&mut self, measured: &GaitFeatures) -> GaitFeatures {
        let window = self.cfg.smoothing_window;
        for p in GaitPhase::ALL {
            self.peaks[p].push(measured.phases[p].peak);
            self.durations[p].push(measured.phases[p].duration);
        }
        let candidate = GaitFeatures::new(
            measured.side,
            PerPhase::from_fn(|p| {
                PhaseFeature::new(smooth_target(&self.peaks[p], window), smooth_target(&self.durations[p], window))
            }),
        );
        let next = match &self.target {
            None => candidate,
            Some(cur) => {
                let dur_threshold = self.cfg.duration_threshold * cur.cycle_duration();
                GaitFeatures::new(
                    cur.side,
                    PerPhase::from_fn(|p| {
                        PhaseFeature::new(
                            threshold_update(cur.phases[p].peak, candidate.phases[p].peak, self.cfg.peak_threshold),
                            threshold_update(cur.phases[p].duration, candidate.phases[p].duration, dur_threshold),
                        )
                    }),
                )
            }
        };
        self.target = Some(next);
        next
    }
}

impl<T: Default> Default for PerPhase<T> {
    fn default() -> Self {
        PerPhase::from_fn(|_| T::default())
    }
}
