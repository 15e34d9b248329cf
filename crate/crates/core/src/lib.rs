//! Data-driven tuning of a four-phase knee impedance controller.
//!
//! A policy-iteration learner per gait phase adjusts stiffness, damping and
//! equilibrium angle so that the prosthesis knee's peak angles and phase
//! durations track the intact side.
//!
//! - [`gait`]: phases, impedance parameters, the torque law and action updates.
//! - [`plant`]: the surrogate knee plant, the intact-side model and the linear
//!   verification plant with its Riccati oracle.
//! - [`features`]: peak/duration extraction and the smoothed intact target.
//! - [`rl`]: quadratic Q-function basis, policy evaluation/improvement and
//!   the per-phase learner.
//! - [`harness`]: configuration, trials, batches, metrics and file formats.

pub mod features;
pub mod gait;
pub mod harness;
pub mod plant;
pub mod rl;
