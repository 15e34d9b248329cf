//! Finite-state-machine impedance controller.
//!
//! A gait cycle is split into four phases, each driven by its own
//! `(K, B, θe)` impedance triple. The controller torque is
//! `K·(θ − θe) + B·ω`; learning adjusts the triples between cycles.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four controller phases, in cycle order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GaitPhase {
    /// Stance flexion.
    #[serde(rename = "STF")]
    StanceFlexion,
    /// Stance extension.
    #[serde(rename = "STE")]
    StanceExtension,
    /// Swing flexion.
    #[serde(rename = "SWF")]
    SwingFlexion,
    /// Swing extension.
    #[serde(rename = "SWE")]
    SwingExtension,
}

impl GaitPhase {
    pub const ALL: [GaitPhase; 4] = [
        GaitPhase::StanceFlexion,
        GaitPhase::StanceExtension,
        GaitPhase::SwingFlexion,
        GaitPhase::SwingExtension,
    ];

    /// Successor in the fixed STF → STE → SWF → SWE → STF cycle.
    pub fn next(self) -> GaitPhase {
        match self {
            GaitPhase::StanceFlexion => GaitPhase::StanceExtension,
            GaitPhase::StanceExtension => GaitPhase::SwingFlexion,
            GaitPhase::SwingFlexion => GaitPhase::SwingExtension,
            GaitPhase::SwingExtension => GaitPhase::StanceFlexion,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Flexion phases end at a maximum, extension phases at a minimum.
    pub fn is_flexion(self) -> bool {
        matches!(self, GaitPhase::StanceFlexion | GaitPhase::SwingFlexion)
    }

    pub fn label(self) -> &'static str {
        match self {
            GaitPhase::StanceFlexion => "STF",
            GaitPhase::StanceExtension => "STE",
            GaitPhase::SwingFlexion => "SWF",
            GaitPhase::SwingExtension => "SWE",
        }
    }
}

/// Free-function form of [`GaitPhase::next`].
pub fn next_phase(p: GaitPhase) -> GaitPhase {
    p.next()
}

impl fmt::Display for GaitPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GaitPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "STF" => Ok(GaitPhase::StanceFlexion),
            "STE" => Ok(GaitPhase::StanceExtension),
            "SWF" => Ok(GaitPhase::SwingFlexion),
            "SWE" => Ok(GaitPhase::SwingExtension),
            other => Err(format!("unknown gait phase '{other}'")),
        }
    }
}

/// A value for each gait phase, indexable by [`GaitPhase`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerPhase<T> {
    #[serde(rename = "STF")]
    pub stf: T,
    #[serde(rename = "STE")]
    pub ste: T,
    #[serde(rename = "SWF")]
    pub swf: T,
    #[serde(rename = "SWE")]
    pub swe: T,
}

impl<T> PerPhase<T> {
    pub fn from_fn(mut f: impl FnMut(GaitPhase) -> T) -> Self {
        PerPhase {
            stf: f(GaitPhase::StanceFlexion),
            ste: f(GaitPhase::StanceExtension),
            swf: f(GaitPhase::SwingFlexion),
            swe: f(GaitPhase::SwingExtension),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(GaitPhase, &T) -> U) -> PerPhase<U> {
        PerPhase::from_fn(|p| f(p, &self[p]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (GaitPhase, &T)> {
        GaitPhase::ALL.into_iter().map(move |p| (p, &self[p]))
    }
}

impl<T: Clone> PerPhase<T> {
    pub fn splat(value: T) -> Self {
        PerPhase::from_fn(|_| value.clone())
    }
}

impl<T> Index<GaitPhase> for PerPhase<T> {
    type Output = T;

    fn index(&self, p: GaitPhase) -> &T {
        match p {
            GaitPhase::StanceFlexion => &self.stf,
            GaitPhase::StanceExtension => &self.ste,
            GaitPhase::SwingFlexion => &self.swf,
            GaitPhase::SwingExtension => &self.swe,
        }
    }
}

impl<T> IndexMut<GaitPhase> for PerPhase<T> {
    fn index_mut(&mut self, p: GaitPhase) -> &mut T {
        match p {
            GaitPhase::StanceFlexion => &mut self.stf,
            GaitPhase::StanceExtension => &mut self.ste,
            GaitPhase::SwingFlexion => &mut self.swf,
            GaitPhase::SwingExtension => &mut self.swe,
        }
    }
}

/// Stiffness (N·m/deg), damping (N·m·s/deg) and equilibrium angle (deg).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceTriple {
    pub k: f64,
    pub b: f64,
    pub theta_e: f64,
}

impl ImpedanceTriple {
    pub const fn new(k: f64, b: f64, theta_e: f64) -> Self {
        ImpedanceTriple { k, b, theta_e }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.k, self.b, self.theta_e]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        ImpedanceTriple::new(v[0], v[1], v[2])
    }
}

/// Closed interval `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }
}

/// Admissible values for one phase's impedance triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceBounds {
    pub k: Range,
    pub b: Range,
    pub theta_e: Range,
}

impl Default for ImpedanceBounds {
    fn default() -> Self {
        ImpedanceBounds {
            k: Range::new(0.0, 10.0),
            b: Range::new(0.0, 2.0),
            theta_e: Range::new(0.0, 80.0),
        }
    }
}

impl ImpedanceBounds {
    pub fn is_valid(&self) -> bool {
        self.k.is_valid()
            && self.b.is_valid()
            && self.theta_e.is_valid()
            && self.k.min >= 0.0
            && self.b.min >= 0.0
    }

    pub fn contains(&self, imp: &ImpedanceTriple) -> bool {
        self.k.contains(imp.k) && self.b.contains(imp.b) && self.theta_e.contains(imp.theta_e)
    }

    /// Clamps each component; the flag reports whether any component moved.
    pub fn clamp(&self, imp: ImpedanceTriple) -> (ImpedanceTriple, bool) {
        let clamped = ImpedanceTriple::new(
            self.k.clamp(imp.k),
            self.b.clamp(imp.b),
            self.theta_e.clamp(imp.theta_e),
        );
        (clamped, clamped != imp)
    }
}

/// Per-update increment `(ΔK, ΔB, Δθe)` for one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dk: f64,
    pub db: f64,
    pub dtheta_e: f64,
}

impl Action {
    pub const ZERO: Action = Action { dk: 0.0, db: 0.0, dtheta_e: 0.0 };

    pub const fn new(dk: f64, db: f64, dtheta_e: f64) -> Self {
        Action { dk, db, dtheta_e }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dk, self.db, self.dtheta_e]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Action::new(v[0], v[1], v[2])
    }
}

impl std::ops::Neg for Action {
    type Output = Action;

    fn neg(self) -> Action {
        Action::new(-self.dk, -self.db, -self.dtheta_e)
    }
}

/// Symmetric magnitude limits on each action component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBounds {
    pub dk: f64,
    pub db: f64,
    pub dtheta_e: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        ActionBounds { dk: 0.5, db: 0.1, dtheta_e: 3.0 }
    }
}

impl ActionBounds {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dk, self.db, self.dtheta_e]
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn contains(&self, u: &Action) -> bool {
        u.dk.abs() <= self.dk && u.db.abs() <= self.db && u.dtheta_e.abs() <= self.dtheta_e
    }

    pub fn clamp(&self, u: Action) -> Action {
        Action::new(
            u.dk.clamp(-self.dk, self.dk),
            u.db.clamp(-self.db, self.db),
            u.dtheta_e.clamp(-self.dtheta_e, self.dtheta_e),
        )
    }
}

/// Knee kinematics: angle (deg), angular velocity (deg/s), time in phase (s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KneeState {
    pub theta: f64,
    pub omega: f64,
    pub t: f64,
}

impl KneeState {
    pub const fn new(theta: f64, omega: f64, t: f64) -> Self {
        KneeState { theta, omega, t }
    }
}

/// Impedance torque `K·(θ − θe) + B·ω` in N·m.
pub fn compute_torque(imp: &ImpedanceTriple, state: &KneeState) -> f64 {
    imp.k * (state.theta - imp.theta_e) + imp.b * state.omega
}

/// The twelve tunable parameters in effect for gait cycle `cycle`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSchedule {
    pub phases: PerPhase<ImpedanceTriple>,
    pub cycle: u64,
}

/// Result of [`apply_action`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionOutcome {
    pub schedule: ImpedanceSchedule,
    /// Increment actually realised after clamping (new − old).
    pub applied: Action,
    /// True when any component hit an impedance bound.
    pub saturated: bool,
}

impl ImpedanceSchedule {
    pub fn new(phases: PerPhase<ImpedanceTriple>) -> Self {
        ImpedanceSchedule { phases, cycle: 0 }
    }

    pub fn triple(&self, phase: GaitPhase) -> &ImpedanceTriple {
        &self.phases[phase]
    }
}

/// Adds `u` to one phase's triple and clamps the result to `bounds`.
///
/// Other phases and the cycle index are left untouched; callers advance the
/// cycle index once all four phases have been updated.
pub fn apply_action(
    sched: &ImpedanceSchedule,
    phase: GaitPhase,
    u: &Action,
    bounds: &ImpedanceBounds,
) -> ActionOutcome {
    let old = sched.phases[phase];
    let raw = ImpedanceTriple::new(old.k + u.dk, old.b + u.db, old.theta_e + u.dtheta_e);
    let (new, saturated) = bounds.clamp(raw);
    let mut schedule = *sched;
    schedule.phases[phase] = new;
    ActionOutcome {
        schedule,
        applied: Action::new(new.k - old.k, new.b - old.b, new.theta_e - old.theta_e),
        saturated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn torque_examples() {
        let s = KneeState::new(40.0, 100.0, 0.0);
        assert_eq!(compute_torque(&ImpedanceTriple::new(0.0, 0.0, 15.0), &s), 0.0);
        let s = KneeState::new(5.0, 4.0, 0.0);
        assert_eq!(compute_torque(&ImpedanceTriple::new(2.0, 0.5, 3.0), &s), 6.0);
        let s = KneeState::new(20.0, 0.0, 0.0);
        assert_eq!(compute_torque(&ImpedanceTriple::new(3.0, 1.0, 20.0), &s), 0.0);
    }

    fn sched_with(imp: ImpedanceTriple) -> ImpedanceSchedule {
        ImpedanceSchedule::new(PerPhase::splat(imp))
    }

    #[test]
    fn action_adds_componentwise() {
        let s = sched_with(ImpedanceTriple::new(5.0, 1.0, 10.0));
        let out = apply_action(
            &s,
            GaitPhase::StanceExtension,
            &Action::new(0.5, -0.1, 2.0),
            &ImpedanceBounds::default(),
        );
        let t = out.schedule.phases[GaitPhase::StanceExtension];
        assert!((t.k - 5.5).abs() < 1e-12);
        assert!((t.b - 0.9).abs() < 1e-12);
        assert!((t.theta_e - 12.0).abs() < 1e-12);
        assert!(!out.saturated);
        for p in [GaitPhase::StanceFlexion, GaitPhase::SwingFlexion, GaitPhase::SwingExtension] {
            assert_eq!(out.schedule.phases[p], s.phases[p]);
        }
    }

    #[test]
    fn zero_action_is_identity() {
        let s = sched_with(ImpedanceTriple::new(3.3, 0.2, 44.0));
        let out = apply_action(&s, GaitPhase::SwingFlexion, &Action::ZERO, &ImpedanceBounds::default());
        assert_eq!(out.schedule, s);
        assert!(!out.saturated);
    }

    #[test]
    fn clamp_sets_saturation_flag() {
        let s = sched_with(ImpedanceTriple::new(0.1, 1.0, 10.0));
        let out = apply_action(
            &s,
            GaitPhase::StanceFlexion,
            &Action::new(-0.5, 0.0, 0.0),
            &ImpedanceBounds::default(),
        );
        assert_eq!(out.schedule.phases[GaitPhase::StanceFlexion].k, 0.0);
        assert!(out.saturated);
        assert!((out.applied.dk + 0.1).abs() < 1e-15);
    }

    #[test]
    fn phase_cycle() {
        assert_eq!(next_phase(GaitPhase::StanceFlexion), GaitPhase::StanceExtension);
        assert_eq!(next_phase(GaitPhase::SwingExtension), GaitPhase::StanceFlexion);
        for p in GaitPhase::ALL {
            assert_eq!(p.next().next().next().next(), p);
            assert_ne!(p.next(), p);
            assert_ne!(p.next().next(), p);
        }
    }

    #[test]
    fn phase_labels_round_trip() {
        for p in GaitPhase::ALL {
            assert_eq!(p.label().parse::<GaitPhase>().unwrap(), p);
        }
        assert!("XX".parse::<GaitPhase>().is_err());
    }

    proptest! {
        #[test]
        fn torque_linear_in_gains(k in 0.0..10.0f64, b in 0.0..2.0f64, a in 0.0..5.0f64,
                                  theta in 0.0..90.0f64, omega in -300.0..300.0f64) {
            let s = KneeState::new(theta, omega, 0.0);
            let base = compute_torque(&ImpedanceTriple::new(k, b, 0.0), &s);
            let scaled = compute_torque(&ImpedanceTriple::new(a * k, a * b, 0.0), &s);
            prop_assert!((scaled - a * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }

        #[test]
        fn action_then_negation_restores(k in 1.0..9.0f64, b in 0.2..1.8f64, te in 5.0..75.0f64,
                                         dk in -0.5..0.5f64, db in -0.1..0.1f64, dt in -3.0..3.0f64) {
            let bounds = ImpedanceBounds::default();
            let s = sched_with(ImpedanceTriple::new(k, b, te));
            let u = Action::new(dk, db, dt);
            let fwd = apply_action(&s, GaitPhase::SwingExtension, &u, &bounds);
            let back = apply_action(&fwd.schedule, GaitPhase::SwingExtension, &-u, &bounds);
            prop_assert!(!fwd.saturated && !back.saturated);
            let a = back.schedule.phases[GaitPhase::SwingExtension].as_array();
            let o = s.phases[GaitPhase::SwingExtension].as_array();
            for i in 0..3 {
                prop_assert!((a[i] - o[i]).abs() < 1e-12);
            }
        }
    }
}
