use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GaitFeatures, PhaseFeature, PlantConfig, Side, Trajectory};
use crate::gait::{GaitPhase, PerPhase};

/// One relaxation step of the intact-side features toward the prosthesis:
/// `P ← P + α·c_P·(P^p − P)`, `D ← D + α·c_D·(D^p − D)`, then clamped to the
/// configured feature bounds.
pub fn adapt_intact(intact: &GaitFeatures, prosthesis: &GaitFeatures, cfg: &PlantConfig) -> GaitFeatures {
    let alpha = cfg.adapt_rate;
    let phases = PerPhase::from_fn(|p| {
        let cur = intact.phases[p];
        let target = prosthesis.phases[p];
        let gain = cfg.adapt_coupling[p];
        let bounds = cfg.feature_bounds[p];
        let peak = cur.peak + alpha * gain.peak * (target.peak - cur.peak);
        let duration = cur.duration + alpha * gain.duration * (target.duration - cur.duration);
        PhaseFeature::new(bounds.peak.clamp(peak), bounds.duration.clamp(duration))
    });
    GaitFeatures::new(Side::Intact, phases)
}

/// Raw intact-knee recording shaped from gait features.
///
/// Consecutive extrema are joined by half-cosine arcs, so each feature point
/// is an exact sample and the signal is smooth in between. The recording
/// starts with `lead` samples of the preceding swing extension and contains
/// `cycles` full cycles followed by a closing sample.
pub fn synthesize_trajectory(features: &GaitFeatures, dt: f64, cycles: usize, lead: usize) -> Trajectory {
    let order = GaitPhase::ALL;
    let samples = |p: GaitPhase| ((features.phases[p].duration / dt).round() as usize).max(1);
    let arc = |from: f64, to: f64, n: usize, i: usize| {
        from + (to - from) * 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos())
    };
    let swe = GaitPhase::SwingExtension;
    let swf_peak = features.phases[GaitPhase::SwingFlexion].peak;
    let trough = features.phases[swe].peak;

    let mut theta = Vec::new();
    let n_swe = samples(swe);
    let lead = lead.min(n_swe);
    for i in (n_swe - lead)..n_swe {
        theta.push(arc(swf_peak, trough, n_swe, i));
    }
    let mut from = trough;
    for _ in 0..cycles {
        for p in order {
            let to = features.phases[p].peak;
            let n = samples(p);
            for i in 0..n {
                theta.push(arc(from, to, n, i));
            }
            from = to;
        }
    }
    theta.push(from);
    Trajectory::raw(dt, theta)
}

/// The intact side of the emulated walker: its true features, which may
/// co-adapt, and a noisy raw recording of them.
#[derive(Clone, Debug)]
pub struct IntactKnee {
    features: GaitFeatures,
    rng: ChaCha8Rng,
}

impl IntactKnee {
    pub fn new(cfg: &PlantConfig, seed: u64) -> Self {
        IntactKnee {
            features: GaitFeatures::new(Side::Intact, cfg.intact_baseline),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn features(&self) -> &GaitFeatures {
        &self.features
    }

    /// Two cycles of the current gait with additive measurement noise.
    pub fn record(&mut self, cfg: &PlantConfig) -> Trajectory {
        let mut traj = synthesize_trajectory(&self.features, cfg.dt, 2, 10);
        if cfg.noise_sigma_theta > 0.0 {
            let noise = Normal::new(0.0, cfg.noise_sigma_theta).expect("validated sigma");
            for v in traj.theta.iter_mut() {
                *v += noise.sample(&mut self.rng);
            }
        }
        traj
    }

    pub fn adapt(&mut self, prosthesis: &GaitFeatures, cfg: &PlantConfig) {
        self.features = adapt_intact(&self.features, prosthesis, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::Range;
    use crate::plant::{AdaptCoupling, FeatureBounds};
    use proptest::prelude::*;

    fn feats(side: Side, peak: f64, dur: f64) -> GaitFeatures {
        GaitFeatures::new(side, PerPhase::splat(PhaseFeature::new(peak, dur)))
    }

    fn cfg_with(alpha: f64, coupling: f64) -> PlantConfig {
        let mut cfg = PlantConfig::default();
        cfg.adapt_rate = alpha;
        cfg.adapt_coupling = PerPhase::splat(AdaptCoupling { peak: coupling, duration: coupling });
        cfg.feature_bounds =
            PerPhase::splat(FeatureBounds { peak: Range::new(-10.0, 100.0), duration: Range::new(0.01, 2.0) });
        cfg
    }

    #[test]
    fn zero_rate_leaves_intact_unchanged() {
        let cfg = cfg_with(0.0, 1.0);
        let i = feats(Side::Intact, 60.0, 0.3);
        let out = adapt_intact(&i, &feats(Side::Prosthesis, 50.0, 0.2), &cfg);
        assert_eq!(out.phases, i.phases);
    }

    #[test]
    fn full_coupling_jumps_to_prosthesis() {
        // α = 1 lies outside the validated range; the law itself still applies.
        let cfg = cfg_with(1.0, 1.0);
        let out = adapt_intact(&feats(Side::Intact, 60.0, 0.3), &feats(Side::Prosthesis, 50.0, 0.2), &cfg);
        for (_, f) in out.phases.iter() {
            assert_eq!(f.peak, 50.0);
            assert_eq!(f.duration, 0.2);
        }
    }

    #[test]
    fn one_euler_step() {
        let cfg = cfg_with(0.1, 1.0);
        let out = adapt_intact(&feats(Side::Intact, 60.0, 0.3), &feats(Side::Prosthesis, 50.0, 0.3), &cfg);
        assert!((out.phases[GaitPhase::SwingFlexion].peak - 59.0).abs() < 1e-12);
    }

    #[test]
    fn synthesized_signal_hits_feature_points() {
        let cfg = PlantConfig::default();
        let f = GaitFeatures::new(Side::Intact, cfg.intact_baseline);
        let traj = synthesize_trajectory(&f, cfg.dt, 1, 0);
        let mut idx = 0;
        for p in GaitPhase::ALL {
            idx += (f.phases[p].duration / cfg.dt).round() as usize;
            assert_eq!(traj.theta[idx], f.phases[p].peak);
        }
        assert_eq!(idx + 1, traj.len());
    }

    proptest! {
        #[test]
        fn relaxation_contracts(alpha in 0.01..0.99f64, c in 0.01..1.0f64,
                                pi in 0.0..80.0f64, pp in 0.0..80.0f64) {
            let cfg = cfg_with(alpha, c);
            let out = adapt_intact(&feats(Side::Intact, pi, 0.3), &feats(Side::Prosthesis, pp, 0.3), &cfg);
            let new = out.phases[GaitPhase::StanceFlexion].peak;
            prop_assert!((new - pp).abs() <= (1.0 - alpha * c) * (pi - pp).abs() + 1e-12);
        }
    }
}
