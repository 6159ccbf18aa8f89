//! Graduated non-convexity optimization for linear inverse problems.
//!
//! The crate minimizes objectives of the form
//!
//! ```text
//! f(x)    = ½‖Ax − y‖² + α_{t_min} R(x, t_min)
//! F(x, t) = ½‖Ax − y‖² + α_t R(x, t)
//! ```
//!
//! where `R(·, t) = −log p_t` is the negative log-density of a prior after it
//! has been pushed through the Gaussian perturbation kernel of a diffusion
//! process up to time `t`. Large `t` gives a convex surrogate; `t_min` gives
//! the original non-convex problem. The optimizers walk `t` downwards:
//!
//! * [`optimizers::gnc_flow`]: one gradient step on `F(·, t_i)` per grid point,
//!   with a constant or line-searched step.
//! * [`optimizers::gradient_like`]: picks the largest admissible smoothing time
//!   whose direction still descends on `f`, then backtracks on `f`.
//! * [`optimizers::gradient_descent`]: the plain baseline on `f`.
//!
//! Priors are Gaussian mixtures, for which the smoothed density, its score and
//! its energy are available in closed form. The crate is `no_std` and only
//! needs `alloc`.

#![no_std]
#![deny(rust_2018_idioms)]
#![warn(missing_debug_implementations)]
// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod objective;
pub mod operators;
pub mod optimizers;
pub mod priors;
pub mod schedules;

pub use error::{Error, Result};
pub use objective::{EvalCounts, Evaluator, InverseProblem, RegularizationWeight};
pub use operators::{build_radon, DenseOperator, LinearOperator, RadonOperator};
pub use optimizers::{
    armijo_backtrack, bb_candidate, gnc_flow, gradient_descent, gradient_like, select_smoothing,
    ArmijoRule, Checkpoint, IterRecord, LineSearch, OptimizerParams, RunSummary, RunTrace, Smoothing,
    StepFlags, StepPolicy, Termination,
};
pub use priors::{empirical_prior, Covariance, DiffusedMixture, GaussianMixture, SmoothedPrior};
pub use schedules::{
    alpha_at, make_grid, AlphaRule, DiffusionSchedule, GridSpacing, KernelParams, NoiseProcess,
    TimeGrid,
};
