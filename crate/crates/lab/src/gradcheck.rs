//! Central finite-difference check of `∇ₓF`.

use gnc_core::{linalg, InverseProblem, LinearOperator, SmoothedPrior};
use rand::Rng;

use crate::error::LabResult;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub x: Vec<f64>,
    pub t: f64,
    /// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)`
    pub rel_err: f64,
}

/// Finite-difference gradient with step `h = 1e-6·(1 + ‖x‖)`.
pub fn fd_gradient<O, P>(problem: &InverseProblem<O, P>, x: &[f64], t: f64) -> LabResult<Vec<f64>>
where
    O: LinearOperator,
    P: SmoothedPrior,
{
    let h = 1e-6 * (1.0 + linalg::norm(x));
    let mut eval = problem.evaluator();
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = eval.value_at(&probe, t)?;
        probe[i] = x[i] - h;
        let down = eval.value_at(&probe, t)?;
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = linalg::norm(a).max(linalg::norm(b));
    if scale == 0.0 {
        0.0
    } else {
        linalg::norm(&diff) / scale
    }
}

/// Compares the analytic gradient with finite differences at `samples`
/// points drawn uniformly from `[-radius, radius]^n` and times drawn
/// log-uniformly from `[t_min, t_max]`.
pub fn gradient_check<O, P, R>(problem: &InverseProblem<O, P>, samples: usize, radius: f64, rng: &mut R) -> LabResult<Vec<GradSample>>
where
    O: LinearOperator,
    P: SmoothedPrior,
    R: Rng,
{
    let (lo, hi) = (problem.t_min().ln(), problem.t_max().ln());
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vec<f64> = (0..problem.dim()).map(|_| rng.random_range(-radius..=radius)).collect();
        let t = rng.random_range(lo..=hi).exp().clamp(problem.t_min(), problem.t_max());
        let g = problem.gradient_at(&x, t)?;
        let fd = fd_gradient(problem, &x, t)?;
        out.push(GradSample {
            rel_err: relative_error(&g, &fd),
            x,
            t,
        });
    }
    Ok(out)
}
