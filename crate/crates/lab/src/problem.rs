//! Assembling inverse problems: the 2-D toy problem and problems described by
//! a config file.

use gnc_core::{
    empirical_prior, DenseOperator, DiffusedMixture, GaussianMixture, InverseProblem, LinearOperator,
    RadonOperator, RegularizationWeight,
};

use crate::config::{build_schedule, Config, OperatorKind, PriorKind, ScheduleDefaults};
use crate::error::{LabError, LabResult};
use crate::io;

/// Operators selectable from a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyOperator {
    Dense(DenseOperator),
    Radon(RadonOperator),
}

impl LinearOperator for AnyOperator {
    fn input_dim(&self) -> usize {
        match self {
            AnyOperator::Dense(a) => a.input_dim(),
            AnyOperator::Radon(a) => a.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            AnyOperator::Dense(a) => a.output_dim(),
            AnyOperator::Radon(a) => a.output_dim(),
        }
    }

    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match self {
            AnyOperator::Dense(a) => a.apply_unchecked(x, out),
            AnyOperator::Radon(a) => a.apply_unchecked(x, out),
        }
    }

    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]) {
        match self {
            AnyOperator::Dense(a) => a.adjoint_unchecked(y, out),
            AnyOperator::Radon(a) => a.adjoint_unchecked(y, out),
        }
    }
}

pub type Problem = InverseProblem<AnyOperator, DiffusedMixture>;

/// Everything needed to build a [`Problem`] for any `t_max`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub operator: AnyOperator,
    pub measurements: Vec<f64>,
    pub mixture: GaussianMixture,
    pub schedule: ScheduleDefaults,
    pub alpha: RegularizationWeight,
}

impl ProblemSpec {
    pub fn build(&self, t_max: Option<f64>) -> LabResult<Problem> {
        let schedule = build_schedule(&self.schedule, t_max)?;
        let prior = DiffusedMixture::new(self.mixture.clone(), schedule);
        InverseProblem::new(self.operator.clone(), self.measurements.clone(), prior, schedule, self.alpha)
            .map_err(|e| LabError::config(format!("problem: {e}")))
    }

    pub fn dim(&self) -> usize {
        self.operator.input_dim()
    }

    /// Problem described by the `problem`, `prior`, `schedule` and `alpha`
    /// sections. Unset keys fall back to the toy problem.
    pub fn from_config(cfg: &Config) -> LabResult<Self> {
        let pc = &cfg.problem;
        let operator = match pc.operator {
            OperatorKind::Toy => AnyOperator::Dense(toy::operator()),
            OperatorKind::Dense => {
                let path = pc
                    .matrix
                    .as_ref()
                    .ok_or_else(|| LabError::config("problem: dense operator needs `matrix`"))?;
                AnyOperator::Dense(io::read_matrix(&cfg.resolve_path(path))?)
            }
            OperatorKind::Radon => {
                let n_px = pc.n_px.ok_or_else(|| LabError::config("problem: radon operator needs `n_px`"))?;
                let n_angles = pc
                    .n_angles
                    .ok_or_else(|| LabError::config("problem: radon operator needs `n_angles`"))?;
                AnyOperator::Radon(
                    gnc_core::build_radon(n_px, n_angles).map_err(|e| LabError::config(format!("problem: {e}")))?,
                )
            }
        };
        let measurements = match (&pc.measurements, &pc.y) {
            (Some(path), _) => io::read_vector(&cfg.resolve_path(path))?,
            (None, Some(y)) => y.clone(),
            (None, None) if pc.operator == OperatorKind::Toy => toy::MEASUREMENTS.to_vec(),
            (None, None) => return Err(LabError::config("problem: needs `measurements` or `y`")),
        };
        let mixture = match cfg.prior.kind {
            PriorKind::Toy => toy::mixture(),
            PriorKind::Mixture => cfg.prior.mixture()?,
            PriorKind::Empirical => {
                let path = cfg
                    .prior
                    .points
                    .as_ref()
                    .ok_or_else(|| LabError::config("prior: empirical prior needs `points`"))?;
                let bandwidth = cfg
                    .prior
                    .bandwidth
                    .ok_or_else(|| LabError::config("prior: empirical prior needs `bandwidth`"))?;
                let points = io::read_points(&cfg.resolve_path(path))?;
                empirical_prior(&points, bandwidth).map_err(|e| LabError::config(format!("prior: {e}")))?
            }
        };
        if mixture.dim() != operator.input_dim() {
            return Err(LabError::config(format!(
                "prior dimension {} does not match operator input dimension {}",
                mixture.dim(),
                operator.input_dim()
            )));
        }
        let spec = Self {
            operator,
            measurements,
            mixture,
            schedule: cfg.schedule.resolve(ScheduleDefaults::TOY),
            alpha: cfg.alpha.resolve(RegularizationWeight::constant(toy::ALPHA)),
        };
        spec.build(None)?;
        Ok(spec)
    }
}

/// The 2-D toy problem: five Gaussians, a rank-one operator and clean data
/// whose least-squares solutions form the line `x_a + x_b = 2`.
pub mod toy {
    use super::*;
    use gnc_core::{Covariance, GaussianMixture};

    pub const MEANS: [[f64; 2]; 5] = [[1.0, 1.0], [-4.0, 3.0], [4.0, -3.0], [-3.0, -4.0], [3.0, 4.0]];
    pub const VARIANCE: f64 = 0.5;
    pub const ALPHA: f64 = 5.0;
    pub const MEASUREMENTS: [f64; 2] = [2.0, 0.0];
    pub const GLOBAL_MINIMIZER: [f64; 2] = [1.0, 1.0];
    /// Points per axis of the brute-force search over `[-10, 10]²`.
    pub const SEARCH_POINTS: usize = 400;
    pub const SEARCH_HALF_WIDTH: f64 = 10.0;

    pub fn operator() -> DenseOperator {
        DenseOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).expect("static matrix")
    }

    pub fn mixture() -> GaussianMixture {
        GaussianMixture::new(
            vec![1.0; 5],
            MEANS.iter().map(|m| m.to_vec()).collect(),
            vec![Covariance::Isotropic(VARIANCE); 5],
        )
        .expect("static mixture")
    }

    pub fn spec() -> ProblemSpec {
        ProblemSpec {
            operator: AnyOperator::Dense(operator()),
            measurements: MEASUREMENTS.to_vec(),
            mixture: mixture(),
            schedule: ScheduleDefaults::TOY,
            alpha: RegularizationWeight::constant(ALPHA),
        }
    }

    /// Toy problem with the default schedule and the given `t_max`.
    pub fn problem(t_max: f64) -> LabResult<Problem> {
        spec().build(Some(t_max))
    }

    /// Brute-force minimiser of `f` over a `SEARCH_POINTS²` grid on
    /// `[-10, 10]²`, then polished by gradient descent. Returns the polished
    /// point.
    pub fn search_global_minimizer(problem: &Problem) -> LabResult<[f64; 2]> {
        if problem.dim() != 2 {
            return Err(LabError::config("grid search needs a 2-D problem"));
        }
        let h = 2.0 * SEARCH_HALF_WIDTH / (SEARCH_POINTS - 1) as f64;
        let mut best = (f64::INFINITY, [0.0; 2]);
        let mut eval = problem.evaluator();
        for i in 0..SEARCH_POINTS {
            for j in 0..SEARCH_POINTS {
                let x = [-SEARCH_HALF_WIDTH + i as f64 * h, -SEARCH_HALF_WIDTH + j as f64 * h];
                let v = eval.value(&x)?;
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
        let params = gnc_core::OptimizerParams {
            eps: 1e-10,
            max_iters: 10_000,
            record_iterations: false,
            ..Default::default()
        };
        let polished = gnc_core::gradient_descent(problem, &best.1, &params)?;
        Ok([polished.x[0], polished.x[1]])
    }

    /// Checks that the brute-force minimiser of `f` is within `tol` of
    /// `(1, 1)`; fails with a config error otherwise.
    pub fn verify_global_minimum(problem: &Problem, tol: f64) -> LabResult<[f64; 2]> {
        let x = search_global_minimizer(problem)?;
        let dist = ((x[0] - GLOBAL_MINIMIZER[0]).powi(2) + (x[1] - GLOBAL_MINIMIZER[1]).powi(2)).sqrt();
        if !(dist < tol) {
            return Err(LabError::config(format!(
                "toy mixture is inconsistent: global minimiser of f found at ({}, {}), not within {tol} of (1, 1)",
                x[0], x[1]
            )));
        }
        Ok(x)
    }
}
