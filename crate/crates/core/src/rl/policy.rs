use nalgebra::{Matrix3, Matrix3x2, SymmetricEigen, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::basis::QWeights;
use super::RlError;
use crate::gait::{Action, ActionBounds};

/// Clamps the eigenvalues of the action block `Huu` from below at `eps`.
///
/// `Hxx` and `Hxu` are untouched. An already feasible `Huu` is returned
/// unchanged, bit for bit.
pub fn project_q(w: &QWeights, eps: f64) -> QWeights {
    let huu = w.huu();
    let eig = SymmetricEigen::new(huu);
    if eig.eigenvalues.iter().all(|&l| l >= eps) {
        return *w;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(eps));
    let rebuilt = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let rebuilt = 0.5 * (rebuilt + rebuilt.transpose());
    let mut h = w.to_kernel();
    h.fixed_view_mut::<3, 3>(2, 2).copy_from(&rebuilt);
    QWeights::from_kernel(&h)
}

/// Linear state feedback `u = −G·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGain(pub Matrix3x2<f64>);

impl FeedbackGain {
    pub fn zero() -> Self {
        FeedbackGain(Matrix3x2::zeros())
    }

    pub fn from_rows(rows: [[f64; 2]; 3]) -> Self {
        FeedbackGain(Matrix3x2::from_fn(|i, j| rows[i][j]))
    }

    pub fn rows(&self) -> [[f64; 2]; 3] {
        let g = &self.0;
        [[g[(0, 0)], g[(0, 1)]], [g[(1, 0)], g[(1, 1)]], [g[(2, 0)], g[(2, 1)]]]
    }

    pub fn action(&self, x: &Vector2<f64>) -> Vector3<f64> {
        -(self.0 * x)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Exact minimiser of the quadratic Q in `u`: `G = Huu⁻¹·Hux`.
pub fn policy_improvement(w: &QWeights) -> Result<FeedbackGain, RlError> {
    let chol = w.huu().cholesky().ok_or(RlError::SingularHuu)?;
    let gain = chol.solve(&w.hux());
    if !gain.iter().all(|v| v.is_finite()) {
        return Err(RlError::SingularHuu);
    }
    Ok(FeedbackGain(gain))
}

/// Gaussian action noise with per-component scale, decayed geometrically at
/// every policy improvement down to a floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub sigma: [f64; 3],
    pub decay: f64,
    pub floor: [f64; 3],
}

impl Exploration {
    pub fn none() -> Self {
        Exploration { sigma: [0.0; 3], decay: 1.0, floor: [0.0; 3] }
    }

    pub fn decayed(&self) -> Self {
        let mut next = *self;
        for i in 0..3 {
            next.sigma[i] = (self.sigma[i] * self.decay).max(self.floor[i].min(self.sigma[i]));
        }
        next
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub gain: FeedbackGain,
    pub exploration: Exploration,
}

impl Policy {
    pub fn greedy(gain: FeedbackGain) -> Self {
        Policy { gain, exploration: Exploration::none() }
    }
}

/// `clamp(−G·x + η)` with `η ~ N(0, diag(σ²))`.
///
/// No random numbers are drawn for components with zero σ.
pub fn act<R: Rng + ?Sized>(policy: &Policy, x: &Vector2<f64>, rng: &mut R, bounds: &ActionBounds) -> Action {
    let mut u = policy.gain.action(x);
    for i in 0..3 {
        let s = policy.exploration.sigma[i];
        if s > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            u[i] += s * z;
        }
    }
    bounds.clamp(Action::new(u[0], u[1], u[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::basis::Basis;
    use nalgebra::{Matrix5, SymmetricEigen};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights_with(huu: Matrix3<f64>, hux: Matrix3x2<f64>) -> QWeights {
        let mut h = Matrix5::identity();
        h.fixed_view_mut::<3, 3>(2, 2).copy_from(&huu);
        h.fixed_view_mut::<3, 2>(2, 0).copy_from(&hux);
        h.fixed_view_mut::<2, 3>(0, 2).copy_from(&hux.transpose());
        QWeights::from_kernel(&h)
    }

    fn sym3(v: &[f64]) -> Matrix3<f64> {
        Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
    }

    #[test]
    fn projection_identity_on_feasible() {
        let w = weights_with(Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.5)), Matrix3x2::repeat(0.3));
        assert_eq!(project_q(&w, 0.01), w);
    }

    #[test]
    fn projection_clamps_diagonal() {
        let w = weights_with(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)), Matrix3x2::repeat(0.3));
        let p = project_q(&w, 0.01);
        let expect = Matrix3::from_diagonal(&Vector3::new(0.01, 1.0, 1.0));
        assert!((p.huu() - expect).abs().max() < 1e-12);
        assert_eq!(p.hxx(), w.hxx());
        assert!((p.hux() - w.hux()).abs().max() < 1e-15);
    }

    #[test]
    fn projection_is_nearest_feasible() {
        // Compare against every feasible point on a grid of symmetric
        // perturbations around the projection.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 0.05;
        let basis: Vec<Matrix3<f64>> = (0..6)
            .map(|k| {
                let mut v = [0.0; 6];
                v[k] = 1.0;
                sym3(&v)
            })
            .collect();
        for _ in 0..20 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let huu = sym3(&v);
            let p = project_q(&weights_with(huu, Matrix3x2::zeros()), eps).huu();
            let best = (p - huu).norm();
            for a in 0..6 {
                for b in a..6 {
                    for &sa in &[-1.0, 1.0] {
                        for &sb in &[-1.0, 1.0] {
                            for &step in &[1e-3, 1e-2, 1e-1] {
                                let cand = p + (sa * basis[a] + sb * basis[b]) * step;
                                let min_eig = SymmetricEigen::new(cand).eigenvalues.min();
                                if min_eig >= eps {
                                    assert!((cand - huu).norm() >= best - 1e-12);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn improvement_examples() {
        let g = policy_improvement(&QWeights::from_kernel(&Matrix5::identity())).unwrap();
        assert_eq!(g.0, Matrix3x2::zeros());
        let x = Vector2::new(0.7, -1.3);
        assert_eq!(g.action(&x), Vector3::zeros());

        let hux = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let g = policy_improvement(&weights_with(Matrix3::identity(), hux)).unwrap();
        assert!((g.0 - hux).abs().max() < 1e-15);
        assert!((g.action(&x) - Vector3::new(-0.7, 1.3, 0.0)).abs().max() < 1e-15);
    }

    #[test]
    fn improvement_rejects_indefinite() {
        let w = weights_with(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)), Matrix3x2::zeros());
        assert_eq!(policy_improvement(&w), Err(RlError::SingularHuu));
    }

    #[test]
    fn improvement_is_monte_carlo_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let huu = m * m.transpose() + Matrix3::identity() * 0.1;
            let hux = Matrix3x2::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let w = weights_with(huu, hux);
            let g = policy_improvement(&w).unwrap();
            let x = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-0.1..0.1));
            let best = w.value(&x, &g.action(&x));
            for _ in 0..10_000 {
                let u = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
                assert!(best <= w.value(&x, &u) + 1e-9);
            }
        }
    }

    #[test]
    fn act_noiseless_and_seeded() {
        let bounds = ActionBounds::default();
        let gain = FeedbackGain::from_rows([[0.1, 2.0], [0.01, -0.5], [0.8, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let greedy = Policy::greedy(gain);
        assert_eq!(act(&greedy, &Vector2::zeros(), &mut rng, &bounds), Action::ZERO);
        let x = Vector2::new(10.0, 0.04);
        let u = act(&greedy, &x, &mut rng, &bounds);
        let raw = gain.action(&x);
        assert_eq!(u, bounds.clamp(Action::new(raw[0], raw[1], raw[2])));

        let noisy = Policy { gain, exploration: Exploration { sigma: [0.1, 0.02, 0.5], decay: 0.9, floor: [0.0; 3] } };
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| act(&noisy, &x, &mut r, &bounds)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
        assert!(draw(9).iter().all(|u| bounds.contains(u)));
    }

    #[test]
    fn exploration_decays_to_floor() {
        let mut e = Exploration { sigma: [1.0, 1.0, 1.0], decay: 0.5, floor: [0.2, 0.0, 2.0] };
        for _ in 0..10 {
            e = e.decayed();
        }
        assert_eq!(e.sigma[0], 0.2);
        assert!(e.sigma[1] < 1e-2);
        // a floor above the current scale never raises it
        assert_eq!(e.sigma[2], 1.0);
    }

    proptest! {
        #[test]
        fn projection_idempotent(v in proptest::collection::vec(-3.0..3.0f64, 15), eps in 1e-6..0.5f64) {
            let w = QWeights(Basis::from_column_slice(&v));
            let once = project_q(&w, eps);
            let twice = project_q(&once, eps);
            prop_assert!((once.0 - twice.0).abs().max() <= 1e-12);
            let min_eig = SymmetricEigen::new(once.huu()).eigenvalues.min();
            prop_assert!(min_eig >= eps - 1e-12);
        }
    }
}
