//! Stationary points of a 2-D target `f`, found by seeding local descent on a
//! grid, and the labels used to classify optimizer endpoints.

use gnc_core::{gradient_descent, linalg, OptimizerParams};

use crate::error::{LabError, LabResult};
use crate::problem::Problem;

/// Endpoints closer than this are merged.
pub const CLUSTER_RADIUS: f64 = 1e-2;
/// Gradient norm below which a census point counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CensusPoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// Seeds whose descent ended here.
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCensus {
    /// Sorted by increasing `f`; the first entry is the global minimiser.
    pub points: Vec<CensusPoint>,
}

impl StationaryCensus {
    pub fn global(&self) -> &CensusPoint {
        &self.points[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusSettings {
    pub resolution: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for CensusSettings {
    fn default() -> Self {
        Self {
            resolution: 20,
            lower: -10.0,
            upper: 10.0,
        }
    }
}

/// Runs gradient descent on `f` from `resolution²` equally spaced seeds,
/// clusters the endpoints and keeps the clusters whose representative has
/// `‖∇f‖ < STATIONARY_TOL`.
pub fn stationary_census(problem: &Problem, settings: &CensusSettings) -> LabResult<StationaryCensus> {
    if problem.dim() != 2 {
        return Err(LabError::config("the stationary census needs a 2-D problem"));
    }
    if settings.resolution < 2 || !(settings.lower < settings.upper) {
        return Err(LabError::config("census needs resolution >= 2 and lower < upper"));
    }
    let params = OptimizerParams {
        eps: 1e-10,
        max_iters: 20_000,
        record_iterations: false,
        ..Default::default()
    };
    let n = settings.resolution;
    let h = (settings.upper - settings.lower) / (n - 1) as f64;
    let mut points: Vec<CensusPoint> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = [settings.lower + i as f64 * h, settings.lower + j as f64 * h];
            let run = gradient_descent(problem, &seed, &params)?;
            if let Some(p) = points
                .iter_mut()
                .find(|p| distance(&p.x, &run.x) < CLUSTER_RADIUS)
            {
                p.hits += 1;
                continue;
            }
            let grad_norm = linalg::norm(&problem.gradient(&run.x)?);
            let f = problem.value(&run.x)?;
            points.push(CensusPoint {
                x: run.x,
                f,
                grad_norm,
                hits: 1,
            });
        }
    }
    points.retain(|p| p.grad_norm < STATIONARY_TOL && p.f.is_finite());
    if points.is_empty() {
        return Err(LabError::numeric("census found no stationary point"));
    }
    points.sort_by(|a, b| a.f.total_cmp(&b.f));
    Ok(StationaryCensus { points })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Global,
    StationaryNonglobal,
    Nonstationary,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Global => "global",
            Label::StationaryNonglobal => "stationary_nonglobal",
            Label::Nonstationary => "nonstationary",
        }
    }

    pub fn is_stationary(self) -> bool {
        self != Label::Nonstationary
    }
}

/// `global` within `tol_x` of the census minimiser, else
/// `stationary_nonglobal` if `‖∇f‖ < tol_g`, else `nonstationary`.
/// Non-finite points are nonstationary.
pub fn classify(x: &[f64], problem: &Problem, census: &StationaryCensus, tol_x: f64, tol_g: f64) -> Label {
    if !linalg::all_finite(x) {
        return Label::Nonstationary;
    }
    if distance(x, &census.global().x) < tol_x {
        return Label::Global;
    }
    match problem.gradient(x) {
        Ok(g) if linalg::norm(&g) < tol_g => Label::StationaryNonglobal,
        _ => Label::Nonstationary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::toy;

    #[test]
    fn toy_census_contains_global_at_one_one() {
        let p = toy::problem(10.0).unwrap();
        let census = stationary_census(&p, &CensusSettings::default()).unwrap();
        assert!(distance(&census.global().x, &[1.0, 1.0]) < 1e-2);
        assert!(census.points.len() >= 2);
        assert!(census.points.iter().all(|c| c.grad_norm < STATIONARY_TOL));
        assert!(census.points.windows(2).all(|w| w[0].f <= w[1].f));
    }

    #[test]
    fn classify_labels() {
        let p = toy::problem(10.0).unwrap();
        let census = stationary_census(&p, &CensusSettings::default()).unwrap();
        let global = census.global().x.clone();
        assert_eq!(classify(&global, &p, &census, 0.1, 1e-4), Label::Global);
        let other = &census.points[1].x;
        assert_eq!(classify(other, &p, &census, 0.1, 1e-4), Label::StationaryNonglobal);
        let far = [8.0, 8.0];
        assert!(linalg::norm(&p.gradient(&far).unwrap()) > 1.0);
        assert_eq!(classify(&far, &p, &census, 0.1, 1e-4), Label::Nonstationary);
        assert_eq!(classify(&[f64::NAN, 0.0], &p, &census, 0.1, 1e-4), Label::Nonstationary);
    }
}
