//! Continuous-discrete extended Kalman filtering on matrix Lie groups.
//!
//! The crate provides:
//!
//! * [`lie`] — a generic matrix-Lie-group abstraction (hat/vee, exp/log,
//!   adjoints, group Jacobians) over any [`lie::GroupDescriptor`];
//! * [`groups`] — concrete realizations: SO(3), SE2(3), R^d and a direct
//!   product combinator, including the navigation state group
//!   SE2(3) x R^3 x R^3;
//! * [`gaussian`] — extended concentrated Gaussians with frame conversion,
//!   sampling and KL-optimal reference-point resets;
//! * [`lekf`] — the filter engine: left- and right-invariant continuous-
//!   discrete EKFs with zero-, first- and full-order covariance resets;
//! * [`ins`] — the GNSS-aided inertial navigation system model;
//! * [`sim`] — truth-trajectory and sensor simulation;
//! * [`harness`] — the Monte Carlo experiment runner, metrics and CSV/JSON
//!   outputs behind the `lgekf` CLI.

pub mod gaussian;
pub mod groups;
pub mod harness;
pub mod ins;
pub mod lekf;
pub mod lie;
pub mod sim;
pub mod so3;
