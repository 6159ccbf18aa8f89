//! Graduated non-convexity flow, the gradient-like method with an adaptive
//! smoothing schedule, and plain gradient descent on `f`.
//!
//! All three take steps `x_{i+1} = x_i + λ_i d_i` and share the step-size
//! machinery: a constant `λ`, Armijo backtracking on `f` from a fixed initial
//! step, or Armijo backtracking seeded by a Barzilai–Borwein candidate. The
//! sufficient-decrease test is always evaluated on the target `f`, never on a
//! smoothed surrogate.

mod line_search;

pub use line_search::{armijo_backtrack, bb_candidate, ArmijoRule, LineSearch};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::objective::{EvalCounts, Evaluator, InverseProblem};
use crate::operators::LinearOperator;
use crate::priors::SmoothedPrior;
use crate::schedules::TimeGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    /// `λ_i = lambda_const`, no objective evaluations.
    Constant,
    /// Backtracking from `lambda_init` every iteration.
    Armijo,
    /// Backtracking from a Barzilai–Borwein candidate (`lambda_init` on the
    /// first iteration).
    ArmijoBb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerParams {
    pub max_iters: usize,
    pub c: f64,
    pub beta: f64,
    /// Stationarity tolerance on `‖∇f‖`.
    pub eps: f64,
    pub policy: StepPolicy,
    pub lambda_const: f64,
    pub lambda_init: f64,
    pub lambda_floor: f64,
    pub lambda_ceil: f64,
    pub max_backtracks: usize,
    /// Keep one [`IterRecord`] per iteration.
    pub record_iterations: bool,
    /// Keep the iterate after every `iterate_stride` steps (0 keeps none).
    pub iterate_stride: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            c: 1e-4,
            beta: 0.5,
            eps: 1e-6,
            policy: StepPolicy::ArmijoBb,
            lambda_const: 1.0,
            lambda_init: 1.0,
            lambda_floor: 1e-12,
            lambda_ceil: 1e3,
            max_backtracks: 60,
            record_iterations: true,
            iterate_stride: 0,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.c) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "must lie in (0, 1)",
            });
        }
        if !open_unit(self.beta) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must lie in (0, 1)",
            });
        }
        for (name, v) in [
            ("eps", self.eps),
            ("lambda_const", self.lambda_const),
            ("lambda_init", self.lambda_init),
            ("lambda_floor", self.lambda_floor),
            ("lambda_ceil", self.lambda_ceil),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0",
                });
            }
        }
        if self.lambda_floor > self.lambda_ceil {
            return Err(Error::InvalidParameter {
                name: "lambda_floor",
                reason: "must not exceed lambda_ceil",
            });
        }
        Ok(())
    }

    fn armijo_rule(&self) -> ArmijoRule {
        ArmijoRule {
            c: self.c,
            beta: self.beta,
            max_backtracks: self.max_backtracks,
            lambda_floor: self.lambda_floor,
        }
    }
}

/// Per-step diagnostic flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct StepFlags(u8);

impl StepFlags {
    pub const NONE: StepFlags = StepFlags(0);
    /// Backtracking ran out of trials; the floor step was taken.
    pub const BACKTRACK_EXHAUSTED: StepFlags = StepFlags(1);
    /// The direction did not descend on `f`; the floor step was taken.
    pub const NON_DESCENT: StepFlags = StepFlags(2);

    pub fn contains(self, other: StepFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn insert(&mut self, other: StepFlags) {
        self.0 |= other.0;
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for StepFlags {
    /// `|`-separated flag names, empty when no flag is set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (flag, name) in [
            (StepFlags::BACKTRACK_EXHAUSTED, "backtrack_exhausted"),
            (StepFlags::NON_DESCENT, "non_descent"),
        ] {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Diagnostics of one iteration, taken at `x_i` before the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    /// 1-based iteration number.
    pub iter: usize,
    /// Smoothing time used for the direction.
    pub t: f64,
    pub lambda: f64,
    /// `f(x_i)`
    pub f: f64,
    /// `F(x_i, t)`
    pub smoothed: f64,
    pub grad_f_norm: f64,
    /// `⟨∇f(x_i), d_i⟩`
    pub descent_inner: f64,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `‖∇f‖ ≤ eps`.
    Converged,
    MaxIter,
    /// A non-finite value appeared; the trace ends at the last finite iterate.
    NumericFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::NumericFailure => "numeric_failure",
        }
    }
}

/// Aggregates maintained for every run, whether or not iterations are recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    /// Largest `⟨∇f(x_i), d_i⟩` seen, if it was computed.
    pub max_descent_inner: Option<f64>,
    /// Smoothing times never increased between steps.
    pub t_nonincreasing: bool,
    pub flagged_steps: usize,
    pub last_t: Option<f64>,
}

impl RunSummary {
    fn new() -> Self {
        Self {
            steps: 0,
            max_descent_inner: None,
            t_nonincreasing: true,
            flagged_steps: 0,
            last_t: None,
        }
    }

    fn observe(&mut self, t: f64, inner: Option<f64>, flags: StepFlags) {
        if let Some(prev) = self.last_t {
            if t > prev {
                self.t_nonincreasing = false;
            }
        }
        self.last_t = Some(t);
        if let Some(v) = inner {
            self.max_descent_inner = Some(match self.max_descent_inner {
                Some(m) if m >= v => m,
                _ => v,
            });
        }
        if !flags.is_empty() {
            self.flagged_steps += 1;
        }
    }
}

/// Iterate stored after `steps` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub steps: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub checkpoints: Vec<Checkpoint>,
    /// Final iterate.
    pub x: Vec<f64>,
    pub termination: Termination,
    pub counts: EvalCounts,
    pub summary: RunSummary,
}

impl RunTrace {
    /// The iterate after `steps` steps, if it was kept; runs that stopped
    /// earlier report their final iterate.
    pub fn iterate_after(&self, steps: usize) -> Option<&[f64]> {
        if steps >= self.summary.steps {
            return Some(&self.x);
        }
        self.checkpoints
            .iter()
            .find(|c| c.steps == steps)
            .map(|c| c.x.as_slice())
    }
}

/// Largest admissible smoothing time and its direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothing {
    /// Grid index of the chosen time.
    pub index: usize,
    pub t: f64,
    /// `d = −t ∇ₓF(x, t)`
    pub direction: Vec<f64>,
    /// `⟨∇f(x), d⟩ < 0`
    pub inner: f64,
}

/// Picks the largest grid time `t_j ≤ t_prev` whose direction
/// `d = −t_j ∇ₓF(x, t_j)` satisfies `⟨∇f(x), d⟩ < 0`.
///
/// `grad_f` must be `∇f(x)` and non-zero. At the last grid point
/// (`t_min`) the direction is `−t_min ∇f(x)`, whose inner product
/// `−t_min ‖∇f(x)‖²` is negative, so the scan always terminates there.
pub fn select_smoothing<O, P>(
    eval: &mut Evaluator<'_, O, P>,
    x: &[f64],
    grad_f: &[f64],
    grid: &TimeGrid,
    t_prev: f64,
) -> Result<Smoothing>
where
    O: LinearOperator,
    P: SmoothedPrior,
{
    check_grid(eval.problem(), grid)?;
    if !(linalg::norm_sq(grad_f) > 0.0) {
        return Err(Error::Precondition("smoothing selection needs a non-zero finite gradient of f"));
    }
    let start = grid
        .first_index_at_most(t_prev)
        .ok_or(Error::Precondition("t_prev lies below the grid"))?;
    let last = grid.len() - 1;
    let mut direction = vec![0.0; x.len()];
    for index in start..=last {
        let t = grid.get(index);
        if index == last {
            direction.copy_from_slice(grad_f);
        } else {
            eval.gradient_into(x, t, &mut direction)?;
        }
        linalg::scale(-t, &mut direction);
        let inner = linalg::dot(grad_f, &direction);
        if inner < 0.0 {
            return Ok(Smoothing {
                index,
                t,
                direction,
                inner,
            });
        }
    }
    Err(Error::Precondition("no smoothing time yields a descent direction"))
}

fn check_grid<O: LinearOperator, P: SmoothedPrior>(problem: &InverseProblem<O, P>, grid: &TimeGrid) -> Result<()> {
    if grid.t_min() != problem.t_min() {
        return Err(Error::InvalidParameter {
            name: "time grid",
            reason: "last grid time must equal the problem's t_min",
        });
    }
    if grid.t_max() > problem.t_max() {
        return Err(Error::InvalidParameter {
            name: "time grid",
            reason: "first grid time exceeds the schedule's t_max",
        });
    }
    Ok(())
}

fn check_start<O: LinearOperator, P: SmoothedPrior>(problem: &InverseProblem<O, P>, x1: &[f64], params: &OptimizerParams) -> Result<()> {
    params.validate()?;
    crate::error::check_len("initial point", problem.dim(), x1.len())?;
    if !linalg::all_finite(x1) {
        return Err(Error::InvalidParameter {
            name: "initial point",
            reason: "must be finite",
        });
    }
    Ok(())
}

/// Step-size bookkeeping shared by the optimizers.
struct Stepper<'p> {
    params: &'p OptimizerParams,
    rule: ArmijoRule,
    previous: Option<(Vec<f64>, Vec<f64>)>,
    trial: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
}

impl<'p> Stepper<'p> {
    fn new(params: &'p OptimizerParams, dim: usize) -> Self {
        Self {
            params,
            rule: params.armijo_rule(),
            previous: None,
            trial: vec![0.0; dim],
            s: vec![0.0; dim],
            z: vec![0.0; dim],
        }
    }

    /// Initial trial step for a direction that is `direction_scale` times a
    /// (smoothed) negative gradient.
    fn initial_step(&mut self, x: &[f64], grad_f: &[f64], direction_scale: f64) -> f64 {
        match (self.params.policy, &self.previous) {
            (StepPolicy::ArmijoBb, Some((xp, gp))) => {
                for i in 0..x.len() {
                    self.s[i] = x[i] - xp[i];
                    self.z[i] = grad_f[i] - gp[i];
                }
                let p = self.params;
                let bb = bb_candidate(&self.s, &self.z, p.lambda_floor, p.lambda_ceil);
                (bb / direction_scale).clamp(p.lambda_floor, p.lambda_ceil)
            }
            _ => self.params.lambda_init,
        }
    }

    /// Chooses `λ` for `x + λ d`. Returns the step and its flags.
    #[allow(clippy::too_many_arguments)]
    fn step<O, P>(
        &mut self,
        eval: &mut Evaluator<'_, O, P>,
        x: &[f64],
        f_x: f64,
        grad_f: &[f64],
        direction: &[f64],
        inner: f64,
        direction_scale: f64,
    ) -> Result<(f64, StepFlags)>
    where
        O: LinearOperator,
        P: SmoothedPrior,
    {
        let mut flags = StepFlags::NONE;
        let lambda = match self.params.policy {
            StepPolicy::Constant => self.params.lambda_const,
            StepPolicy::Armijo | StepPolicy::ArmijoBb => {
                if inner < 0.0 {
                    let lambda0 = self.initial_step(x, grad_f, direction_scale);
                    let trial = &mut self.trial;
                    let ls = armijo_backtrack(
                        |lambda| {
                            for i in 0..x.len() {
                                trial[i] = x[i] + lambda * direction[i];
                            }
                            eval.value(trial)
                        },
                        f_x,
                        inner,
                        &self.rule,
                        lambda0,
                    )?;
                    if ls.exhausted {
                        flags.insert(StepFlags::BACKTRACK_EXHAUSTED);
                    }
                    ls.lambda
                } else {
                    flags.insert(StepFlags::NON_DESCENT);
                    self.params.lambda_floor
                }
            }
        };
        if self.params.policy == StepPolicy::ArmijoBb {
            match &mut self.previous {
                Some((xp, gp)) => {
                    xp.copy_from_slice(x);
                    gp.copy_from_slice(grad_f);
                }
                None => self.previous = Some((x.to_vec(), grad_f.to_vec())),
            }
        }
        Ok((lambda, flags))
    }
}

struct Recorder {
    record: bool,
    stride: usize,
    records: Vec<IterRecord>,
    checkpoints: Vec<Checkpoint>,
    summary: RunSummary,
}

impl Recorder {
    fn new(params: &OptimizerParams) -> Self {
        Self {
            record: params.record_iterations,
            stride: params.iterate_stride,
            records: Vec::new(),
            checkpoints: Vec::new(),
            summary: RunSummary::new(),
        }
    }

    fn push(&mut self, record: IterRecord, inner_known: bool) {
        let inner = inner_known.then_some(record.descent_inner);
        self.summary.observe(record.t, inner, record.flags);
        if self.record {
            self.records.push(record);
        }
    }

    fn stepped(&mut self, x: &[f64]) {
        self.summary.steps += 1;
        if self.stride > 0 && self.summary.steps % self.stride == 0 {
            self.checkpoints.push(Checkpoint {
                steps: self.summary.steps,
                x: x.to_vec(),
            });
        }
    }

    fn finish(self, x: Vec<f64>, termination: Termination, counts: EvalCounts) -> RunTrace {
        RunTrace {
            records: self.records,
            checkpoints: self.checkpoints,
            x,
            termination,
            counts,
            summary: self.summary,
        }
    }
}

/// Applies `x ← x + λ d`; returns `false` (leaving `x` untouched) if the
/// result would not be finite.
fn take_step(x: &mut [f64], lambda: f64, direction: &[f64], scratch: &mut [f64]) -> bool {
    for i in 0..x.len() {
        scratch[i] = x[i] + lambda * direction[i];
    }
    if linalg::all_finite(scratch) {
        x.copy_from_slice(scratch);
        true
    } else {
        false
    }
}

/// Graduated non-convexity flow: for each grid time `t_i` except the last,
/// `d_i = −t_i ∇ₓF(x_i, t_i)` and `x_{i+1} = x_i + λ_i d_i`.
///
/// With [`StepPolicy::Constant`] no objective values are needed and `f` is
/// only evaluated when iterations are recorded. The line-search policies
/// backtrack on `f` when `d_i` descends and otherwise take the floor step,
/// flagged [`StepFlags::NON_DESCENT`].
pub fn gnc_flow<O, P>(problem: &InverseProblem<O, P>, x1: &[f64], grid: &TimeGrid, params: &OptimizerParams) -> Result<RunTrace>
where
    O: LinearOperator,
    P: SmoothedPrior,
{
    check_start(problem, x1, params)?;
    check_grid(problem, grid)?;
    let n = problem.dim();
    let steps = (grid.len() - 1).min(params.max_iters);
    let needs_target = params.record_iterations || params.policy != StepPolicy::Constant;

    let mut eval = problem.evaluator();
    let mut stepper = Stepper::new(params, n);
    let mut rec = Recorder::new(params);
    let mut x = x1.to_vec();
    let mut direction = vec![0.0; n];
    let mut grad_f = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut termination = Termination::MaxIter;

    for i in 0..steps {
        let t = grid.get(i);
        eval.gradient_into(&x, t, &mut direction)?;
        linalg::scale(-t, &mut direction);
        if !linalg::all_finite(&direction) {
            termination = Termination::NumericFailure;
            break;
        }
        let (f_x, inner) = if needs_target {
            let value = eval.evaluate_into(&x, problem.t_min(), &mut grad_f)?;
            (value, linalg::dot(&grad_f, &direction))
        } else {
            (f64::NAN, f64::NAN)
        };
        if needs_target && !(f_x.is_finite() && inner.is_finite()) {
            termination = Termination::NumericFailure;
            break;
        }
        let (lambda, flags) = stepper.step(&mut eval, &x, f_x, &grad_f, &direction, inner, t)?;
        let smoothed = if params.record_iterations {
            eval.value_at(&x, t)?
        } else {
            f64::NAN
        };
        rec.push(
            IterRecord {
                iter: i + 1,
                t,
                lambda,
                f: f_x,
                smoothed,
                grad_f_norm: if needs_target { linalg::norm(&grad_f) } else { f64::NAN },
                descent_inner: inner,
                flags,
            },
            needs_target,
        );
        if !take_step(&mut x, lambda, &direction, &mut scratch) {
            termination = Termination::NumericFailure;
            break;
        }
        rec.stepped(&x);
    }
    Ok(rec.finish(x, termination, eval.counts()))
}

/// Gradient-like method with the adaptive smoothing schedule.
///
/// Iteration `i` (1-based) stops when `‖∇f(x_i)‖ ≤ eps`; otherwise it takes
/// the direction from [`select_smoothing`] with the bound
/// `t_prev = min(t̃_{i−1}, t_i)`, where `t_i` is the `i`-th grid time and
/// `t̃_0 = t_max`. The chosen times are therefore non-increasing and reach
/// `t_min` by the last grid point. Steps come from Armijo backtracking on
/// `f`; a Barzilai–Borwein candidate is divided by `t̃_i` so that it is
/// measured in units of `d_i`. At most `min(grid.len(), max_iters)` steps are
/// taken.
pub fn gradient_like<O, P>(problem: &InverseProblem<O, P>, x1: &[f64], grid: &TimeGrid, params: &OptimizerParams) -> Result<RunTrace>
where
    O: LinearOperator,
    P: SmoothedPrior,
{
    check_start(problem, x1, params)?;
    check_grid(problem, grid)?;
    let n = problem.dim();
    let max_steps = grid.len().min(params.max_iters);

    let mut eval = problem.evaluator();
    let mut stepper = Stepper::new(params, n);
    let mut rec = Recorder::new(params);
    let mut x = x1.to_vec();
    let mut scratch = vec![0.0; n];
    let mut grad_f = vec![0.0; n];
    let mut t_prev = grid.t_max();
    let mut termination = Termination::MaxIter;

    for i in 0..=max_steps {
        let f_x = eval.evaluate_into(&x, problem.t_min(), &mut grad_f)?;
        if !(f_x.is_finite() && linalg::all_finite(&grad_f)) {
            termination = Termination::NumericFailure;
            break;
        }
        let grad_norm = linalg::norm(&grad_f);
        if grad_norm <= params.eps {
            termination = Termination::Converged;
            break;
        }
        if i == max_steps {
            break;
        }
        let bound = t_prev.min(grid.get(i));
        let sel = match select_smoothing(&mut eval, &x, &grad_f, grid, bound) {
            Ok(sel) => sel,
            Err(Error::Precondition(_)) => {
                termination = Termination::NumericFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        let (lambda, flags) = stepper.step(
            &mut eval,
            &x,
            f_x,
            &grad_f,
            &sel.direction,
            sel.inner,
            sel.t,
        )?;
        let smoothed = if params.record_iterations {
            eval.value_at(&x, sel.t)?
        } else {
            f64::NAN
        };
        rec.push(
            IterRecord {
                iter: i + 1,
                t: sel.t,
                lambda,
                f: f_x,
                smoothed,
                grad_f_norm: grad_norm,
                descent_inner: sel.inner,
                flags,
            },
            true,
        );
        if !take_step(&mut x, lambda, &sel.direction, &mut scratch) {
            termination = Termination::NumericFailure;
            break;
        }
        rec.stepped(&x);
        t_prev = sel.t;
    }
    Ok(rec.finish(x, termination, eval.counts()))
}

/// Gradient descent on `f` with `d_i = −∇f(x_i)` and the configured step
/// policy, for at most `max_iters` steps.
pub fn gradient_descent<O, P>(problem: &InverseProblem<O, P>, x1: &[f64], params: &OptimizerParams) -> Result<RunTrace>
where
    O: LinearOperator,
    P: SmoothedPrior,
{
    check_start(problem, x1, params)?;
    let n = problem.dim();
    let t_min = problem.t_min();

    let mut eval = problem.evaluator();
    let mut stepper = Stepper::new(params, n);
    let mut rec = Recorder::new(params);
    let mut x = x1.to_vec();
    let mut direction = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut grad_f = vec![0.0; n];
    let mut termination = Termination::MaxIter;

    for i in 0..=params.max_iters {
        let f_x = eval.evaluate_into(&x, t_min, &mut grad_f)?;
        if !(f_x.is_finite() && linalg::all_finite(&grad_f)) {
            termination = Termination::NumericFailure;
            break;
        }
        let grad_norm = linalg::norm(&grad_f);
        if grad_norm <= params.eps {
            termination = Termination::Converged;
            break;
        }
        if i == params.max_iters {
            break;
        }
        for (d, g) in direction.iter_mut().zip(&grad_f) {
            *d = -g;
        }
        let inner = -grad_norm * grad_norm;
        let (lambda, flags) = stepper.step(&mut eval, &x, f_x, &grad_f, &direction, inner, 1.0)?;
        rec.push(
            IterRecord {
                iter: i + 1,
                t: t_min,
                lambda,
                f: f_x,
                smoothed: f_x,
                grad_f_norm: grad_norm,
                descent_inner: inner,
                flags,
            },
            true,
        );
        if !take_step(&mut x, lambda, &direction, &mut scratch) {
            termination = Termination::NumericFailure;
            break;
        }
        rec.stepped(&x);
    }
    Ok(rec.finish(x, termination, eval.counts()))
}
