//! The embedding family `F(x, t) = ½‖Ax − y‖² + α_t R(x, t)` and the target
//! `f(x) = F(x, t_min)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_len;
use crate::linalg::{self, require_positive};
use crate::operators::LinearOperator;
use crate::priors::SmoothedPrior;
use crate::schedules::{alpha_at, AlphaRule, DiffusionSchedule};
use crate::{Error, Result};

/// `α_t` as a base value and a time rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationWeight {
    pub base: f64,
    pub rule: AlphaRule,
}

impl RegularizationWeight {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            rule: AlphaRule::Constant,
        }
    }

    pub fn nu_over_gamma(base: f64) -> Self {
        Self {
            base,
            rule: AlphaRule::NuOverGamma,
        }
    }
}

/// Linear inverse problem with a time-smoothed prior.
///
/// `base = 0` is allowed here and switches the prior off, which turns `F`
/// into plain least squares.
#[derive(Debug, Clone)]
pub struct InverseProblem<O, P> {
    operator: O,
    measurements: Vec<f64>,
    prior: P,
    schedule: DiffusionSchedule,
    alpha: RegularizationWeight,
}

impl<O: LinearOperator, P: SmoothedPrior> InverseProblem<O, P> {
    pub fn new(
        operator: O,
        measurements: Vec<f64>,
        prior: P,
        schedule: DiffusionSchedule,
        alpha: RegularizationWeight,
    ) -> Result<Self> {
        check_len("measurements", operator.output_dim(), measurements.len())?;
        check_len("prior dimension", operator.input_dim(), prior.dim())?;
        if !linalg::all_finite(&measurements) {
            return Err(Error::InvalidParameter {
                name: "measurements",
                reason: "must be finite",
            });
        }
        if alpha.base != 0.0 {
            require_positive("alpha", alpha.base)?;
        }
        Ok(Self {
            operator,
            measurements,
            prior,
            schedule,
            alpha,
        })
    }

    pub fn operator(&self) -> &O {
        &self.operator
    }

    pub fn measurements(&self) -> &[f64] {
        &self.measurements
    }

    pub fn prior(&self) -> &P {
        &self.prior
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    pub fn alpha(&self) -> RegularizationWeight {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.operator.input_dim()
    }

    pub fn t_min(&self) -> f64 {
        self.schedule.t_min()
    }

    pub fn t_max(&self) -> f64 {
        self.schedule.t_max()
    }

    /// `α_t`; zero when the prior is switched off.
    pub fn alpha_at(&self, t: f64) -> Result<f64> {
        self.schedule.check_active(t)?;
        if self.alpha.base == 0.0 {
            return Ok(0.0);
        }
        alpha_at(self.alpha.base, &self.schedule, t, self.alpha.rule)
    }

    pub fn evaluator(&self) -> Evaluator<'_, O, P> {
        Evaluator::new(self)
    }

    /// `F(x, t)`.
    pub fn value_at(&self, x: &[f64], t: f64) -> Result<f64> {
        self.evaluator().value_at(x, t)
    }

    /// `∇ₓ F(x, t) = A*(Ax − y) − α_t ∇ log p_t(x)`.
    pub fn gradient_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.evaluator().gradient_into(x, t, &mut out)?;
        Ok(out)
    }

    /// `f(x) = F(x, t_min)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.value_at(x, self.t_min())
    }

    /// `∇f(x) = ∇ₓ F(x, t_min)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient_at(x, self.t_min())
    }
}

/// Operator and prior evaluation counts of one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub forward: u64,
    pub adjoint: u64,
    pub energy: u64,
    pub score: u64,
}

/// Objective value and gradient at one `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub t: f64,
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Evaluates `F` with reusable buffers and per-trajectory counters.
#[derive(Debug)]
pub struct Evaluator<'a, O, P> {
    problem: &'a InverseProblem<O, P>,
    counts: EvalCounts,
    residual: Vec<f64>,
    score: Vec<f64>,
}

impl<'a, O: LinearOperator, P: SmoothedPrior> Evaluator<'a, O, P> {
    pub fn new(problem: &'a InverseProblem<O, P>) -> Self {
        Self {
            problem,
            counts: EvalCounts::default(),
            residual: vec![0.0; problem.operator.output_dim()],
            score: vec![0.0; problem.dim()],
        }
    }

    pub fn problem(&self) -> &'a InverseProblem<O, P> {
        self.problem
    }

    pub fn counts(&self) -> EvalCounts {
        self.counts
    }

    fn update_residual(&mut self, x: &[f64]) -> Result<()> {
        self.problem.operator.apply_into(x, &mut self.residual)?;
        self.counts.forward += 1;
        for (r, y) in self.residual.iter_mut().zip(&self.problem.measurements) {
            *r -= y;
        }
        Ok(())
    }

    /// `F(x, t)`.
    pub fn value_at(&mut self, x: &[f64], t: f64) -> Result<f64> {
        let alpha = self.problem.alpha_at(t)?;
        self.update_residual(x)?;
        let data = 0.5 * linalg::norm_sq(&self.residual);
        if alpha == 0.0 {
            return Ok(data);
        }
        self.counts.energy += 1;
        Ok(data + alpha * self.problem.prior.energy(x, t)?)
    }

    /// Writes `∇ₓF(x, t)` into `out`.
    pub fn gradient_into(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let alpha = self.problem.alpha_at(t)?;
        check_len("gradient buffer", self.problem.dim(), out.len())?;
        self.update_residual(x)?;
        self.problem.operator.adjoint_into(&self.residual, out)?;
        self.counts.adjoint += 1;
        if alpha != 0.0 {
            self.problem.prior.score_into(x, t, &mut self.score)?;
            self.counts.score += 1;
            linalg::axpy(-alpha, &self.score, out);
        }
        Ok(())
    }

    /// Value and gradient sharing one residual computation.
    pub fn evaluate(&mut self, x: &[f64], t: f64) -> Result<Evaluation> {
        let mut gradient = vec![0.0; self.problem.dim()];
        let value = self.evaluate_into(x, t, &mut gradient)?;
        Ok(Evaluation { t, value, gradient })
    }

    /// Writes `∇ₓF(x, t)` into `out` and returns `F(x, t)`.
    pub fn evaluate_into(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<f64> {
        let alpha = self.problem.alpha_at(t)?;
        check_len("gradient buffer", self.problem.dim(), out.len())?;
        self.update_residual(x)?;
        let mut value = 0.5 * linalg::norm_sq(&self.residual);
        self.problem.operator.adjoint_into(&self.residual, out)?;
        self.counts.adjoint += 1;
        if alpha != 0.0 {
            value += alpha * self.problem.prior.energy_and_score_into(x, t, &mut self.score)?;
            self.counts.energy += 1;
            self.counts.score += 1;
            linalg::axpy(-alpha, &self.score, out);
        }
        Ok(value)
    }

    /// `f(x)`.
    pub fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.value_at(x, self.problem.t_min())
    }

    /// Writes `∇f(x)` into `out`.
    pub fn gradient_into_target(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.gradient_into(x, self.problem.t_min(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::DenseOperator;
    use crate::priors::{DiffusedMixture, GaussianMixture};

    fn schedule() -> DiffusionSchedule {
        DiffusionSchedule::variance_exploding(10.0, 1e-3, 10.0).unwrap()
    }

    fn toy(alpha: f64) -> InverseProblem<DenseOperator, DiffusedMixture> {
        let a = DenseOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let gmm = GaussianMixture::isotropic(
            vec![1.0; 3],
            vec![vec![1.0, 1.0], vec![-4.0, 3.0], vec![4.0, -3.0]],
            0.5,
        )
        .unwrap();
        InverseProblem::new(
            a,
            vec![2.0, 0.0],
            DiffusedMixture::new(gmm, schedule()),
            schedule(),
            RegularizationWeight::constant(alpha),
        )
        .unwrap()
    }

    #[test]
    fn data_fit_vanishes_at_ones() {
        let p = toy(5.0);
        for &t in &[1e-3, 0.5, 10.0] {
            let f = p.value_at(&[1.0, 1.0], t).unwrap();
            let e = p.prior().energy(&[1.0, 1.0], t).unwrap();
            assert_eq!(f, 5.0 * e);
        }
        let g = toy(0.0).gradient_at(&[1.0, 1.0], 0.3).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_alpha_is_least_squares() {
        let p = toy(0.0);
        let x = [0.3, -2.0];
        let r = 0.3 - 2.0 - 2.0;
        assert_eq!(p.value_at(&x, 0.7).unwrap(), 0.5 * r * r);
    }

    #[test]
    fn identity_operator_gradient_is_residual() {
        let gmm = GaussianMixture::isotropic(vec![1.0], vec![vec![0.0; 3]], 1.0).unwrap();
        let p = InverseProblem::new(
            DenseOperator::identity(3),
            vec![1.0, 2.0, 3.0],
            DiffusedMixture::new(gmm, schedule()),
            schedule(),
            RegularizationWeight::constant(0.0),
        )
        .unwrap();
        assert_eq!(p.gradient_at(&[0.0, 0.0, 0.0], 1.0).unwrap(), vec![-1.0, -2.0, -3.0]);
        assert_eq!(p.gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn target_is_smoothed_value_at_t_min() {
        let p = toy(5.0);
        let x = [0.4, -1.3];
        assert_eq!(p.value(&x).unwrap(), p.value_at(&x, 1e-3).unwrap());
        assert_eq!(p.gradient(&x).unwrap(), p.gradient_at(&x, 1e-3).unwrap());
    }

    #[test]
    fn evaluate_matches_separate_calls_and_counts() {
        let p = toy(5.0);
        let mut ev = p.evaluator();
        let x = [2.0, -0.5];
        let e = ev.evaluate(&x, 0.2).unwrap();
        assert_eq!(e.value, p.value_at(&x, 0.2).unwrap());
        assert_eq!(e.gradient, p.gradient_at(&x, 0.2).unwrap());
        assert_eq!(
            ev.counts(),
            EvalCounts {
                forward: 1,
                adjoint: 1,
                energy: 1,
                score: 1
            }
        );
        ev.value(&x).unwrap();
        assert_eq!(ev.counts().forward, 2);
    }

    #[test]
    fn construction_and_domain_errors() {
        let p = toy(5.0);
        assert!(p.value_at(&[1.0, 1.0], 1e-4).is_err());
        assert!(p.value_at(&[1.0], 1.0).is_err());
        let a = DenseOperator::identity(2);
        let gmm = GaussianMixture::isotropic(vec![1.0], vec![vec![0.0; 2]], 1.0).unwrap();
        let prior = DiffusedMixture::new(gmm, schedule());
        assert!(InverseProblem::new(&a, vec![1.0], &prior, schedule(), RegularizationWeight::constant(1.0)).is_err());
        assert!(InverseProblem::new(&a, vec![1.0, 0.0], &prior, schedule(), RegularizationWeight::constant(-1.0)).is_err());
    }
}
