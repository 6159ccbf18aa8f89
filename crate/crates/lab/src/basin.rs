//! Convergence-basin sweep on a 2-D problem: run an optimizer from every point
//! of an initial grid for every `t_max` and classify the iterates.

use gnc_core::{gnc_flow, gradient_descent, gradient_like, make_grid, RunTrace, Termination};
use rayon::prelude::*;
use serde::Serialize;

use crate::census::{classify, stationary_census, CensusSettings, Label, StationaryCensus};
use crate::config::{Algorithm, Config, Solver, Spacing};
use crate::error::{LabError, LabResult};
use crate::io;
use crate::problem::{Problem, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BasinConfig {
    pub lower: f64,
    pub upper: f64,
    /// Initial points per axis.
    pub resolution: usize,
    pub t_max_count: usize,
    pub t_max_min: f64,
    pub t_max_max: f64,
    pub iters: usize,
    /// Iterations between classification checkpoints.
    pub checkpoint_stride: usize,
    pub tol_x: f64,
    pub tol_g: f64,
    pub spacing: Spacing,
    pub solver: Solver,
    pub census: CensusSettings,
}

impl BasinConfig {
    /// Desk-scale defaults: 100×100 initial points on `[-10, 10]²`, 20
    /// log-spaced `t_max ∈ [1e-2, 10]`, 1300 iterations, GNC flow with a
    /// constant step of 0.1.
    pub fn desk_scale() -> Self {
        Self {
            lower: -10.0,
            upper: 10.0,
            resolution: 100,
            t_max_count: 20,
            t_max_min: 1e-2,
            t_max_max: 10.0,
            iters: 1300,
            checkpoint_stride: 10,
            tol_x: 0.1,
            tol_g: 1e-4,
            spacing: Spacing::Linear,
            solver: Solver {
                algorithm: Algorithm::GncFlow,
                params: gnc_core::OptimizerParams {
                    policy: gnc_core::StepPolicy::Constant,
                    lambda_const: 0.1,
                    max_iters: 1300,
                    ..Default::default()
                },
            },
            census: CensusSettings::default(),
        }
    }

    pub fn from_config(cfg: &Config) -> LabResult<Self> {
        let d = Self::desk_scale();
        let b = &cfg.basin;
        let full = b.full_scale.unwrap_or(false);
        let mut solver = cfg.optimizer.resolve(&d.solver)?;
        let iters = b.iters.or(cfg.optimizer.max_iters).unwrap_or(d.iters);
        solver.params.max_iters = iters;
        let out = Self {
            lower: b.x_min.unwrap_or(d.lower),
            upper: b.x_max.unwrap_or(d.upper),
            resolution: b.resolution.unwrap_or(d.resolution),
            t_max_count: b.t_max_count.unwrap_or(if full { 100 } else { d.t_max_count }),
            t_max_min: b.t_max_min.unwrap_or(d.t_max_min),
            t_max_max: b.t_max_max.unwrap_or(d.t_max_max),
            iters,
            checkpoint_stride: b.checkpoint_stride.unwrap_or(d.checkpoint_stride),
            tol_x: b.tol_x.unwrap_or(d.tol_x),
            tol_g: b.tol_g.unwrap_or(d.tol_g),
            spacing: cfg.grid.spacing.unwrap_or(d.spacing),
            solver,
            census: CensusSettings {
                resolution: b.census_resolution.or(cfg.census.resolution).unwrap_or(d.census.resolution),
                lower: cfg.census.x_min.unwrap_or(d.census.lower),
                upper: cfg.census.x_max.unwrap_or(d.census.upper),
            },
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |m: &str| Err(LabError::config(format!("basin: {m}")));
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return bad("bounds must be finite with x_min < x_max");
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2");
        }
        if self.t_max_count == 0 || !(self.t_max_min > 0.0 && self.t_max_min <= self.t_max_max) {
            return bad("need t_max_count >= 1 and 0 < t_max_min <= t_max_max");
        }
        if self.t_max_count == 1 && self.t_max_min != self.t_max_max {
            return bad("a single t_max needs t_max_min = t_max_max");
        }
        if self.iters == 0 || self.checkpoint_stride == 0 {
            return bad("iters and checkpoint_stride must be positive");
        }
        if !(self.tol_x > 0.0 && self.tol_g > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn initial_points(&self) -> Vec<[f64; 2]> {
        let n = self.resolution;
        let h = (self.upper - self.lower) / (n - 1) as f64;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push([self.lower + i as f64 * h, self.lower + j as f64 * h]);
            }
        }
        out
    }

    /// `t_max` values, log-spaced and increasing.
    pub fn t_max_values(&self) -> Vec<f64> {
        if self.t_max_count == 1 {
            return vec![self.t_max_min];
        }
        let (a, b) = (self.t_max_min.ln(), self.t_max_max.ln());
        let last = self.t_max_count - 1;
        (0..self.t_max_count)
            .map(|k| match k {
                0 => self.t_max_min,
                k if k == last => self.t_max_max,
                k => (a + (b - a) * k as f64 / last as f64).exp(),
            })
            .collect()
    }

    /// Iterations at which rates are reported: 0, every stride, and the last.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = (0..=self.iters).step_by(self.checkpoint_stride).collect();
        if *ks.last().unwrap() != self.iters {
            ks.push(self.iters);
        }
        ks
    }
}

/// Outcome of one `(x₁, t_max)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub x1: [f64; 2],
    pub t_max: f64,
    /// Label at each checkpoint.
    pub labels: Vec<Label>,
    pub termination: Option<Termination>,
    /// The run returned an error or hit a numeric failure.
    pub failed: bool,
    pub max_descent_inner: Option<f64>,
    pub t_nonincreasing: bool,
    pub flagged_steps: usize,
}

impl CellResult {
    pub fn final_label(&self) -> Label {
        *self.labels.last().expect("at least one checkpoint")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub t_max: f64,
    pub iter: usize,
    pub rate_global: f64,
    pub rate_stationary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinMetadata {
    pub algorithm: String,
    pub lambda_policy: String,
    pub lambda_const: f64,
    pub iters: usize,
    pub resolution: usize,
    pub bounds: [f64; 2],
    pub t_max_values: Vec<f64>,
    pub spacing: String,
    pub schedule: String,
    pub sigma: f64,
    pub t_min: f64,
    pub alpha: f64,
    pub alpha_rule: String,
    pub tol_x: f64,
    pub tol_g: f64,
    pub global_minimizer: Vec<f64>,
    pub census_points: Vec<Vec<f64>>,
    pub mixture_weights: Vec<f64>,
    pub mixture_means: Vec<Vec<f64>>,
    pub failed_runs: usize,
    pub flagged_steps: usize,
    pub max_descent_inner: Option<f64>,
    pub smoothing_nonincreasing: bool,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinResult {
    pub checkpoints: Vec<usize>,
    /// Cells grouped by `t_max` (outer) and initial point (inner).
    pub cells: Vec<CellResult>,
    pub rates: Vec<RateRow>,
    pub census: StationaryCensus,
    pub metadata: BasinMetadata,
}

fn run(problem: &Problem, solver: &Solver, x1: &[f64], grid: &gnc_core::TimeGrid) -> gnc_core::Result<RunTrace> {
    match solver.algorithm {
        Algorithm::GncFlow => gnc_flow(problem, x1, grid, &solver.params),
        Algorithm::GradientLike => gradient_like(problem, x1, grid, &solver.params),
        Algorithm::GradientDescent => gradient_descent(problem, x1, &solver.params),
    }
}

/// Grid length that gives `iters` steps for the chosen algorithm.
pub fn grid_len(algorithm: Algorithm, iters: usize) -> usize {
    match algorithm {
        Algorithm::GncFlow => iters + 1,
        _ => iters.max(2),
    }
}

fn run_cell(
    problem: &Problem,
    cfg: &BasinConfig,
    grid: &gnc_core::TimeGrid,
    census: &StationaryCensus,
    checkpoints: &[usize],
    x1: [f64; 2],
    t_max: f64,
) -> CellResult {
    let mut solver = cfg.solver.clone();
    solver.params.record_iterations = false;
    solver.params.iterate_stride = cfg.checkpoint_stride;
    solver.params.max_iters = cfg.iters;
    let classify_at = |x: &[f64]| classify(x, problem, census, cfg.tol_x, cfg.tol_g);
    match run(problem, &solver, &x1, grid) {
        Ok(trace) => {
            let failed = trace.termination == Termination::NumericFailure;
            let labels = checkpoints
                .iter()
                .map(|&k| {
                    if k == 0 {
                        classify_at(&x1)
                    } else {
                        trace.iterate_after(k).map_or(Label::Nonstationary, classify_at)
                    }
                })
                .collect();
            CellResult {
                x1,
                t_max,
                labels,
                termination: Some(trace.termination),
                failed,
                max_descent_inner: trace.summary.max_descent_inner,
                t_nonincreasing: trace.summary.t_nonincreasing,
                flagged_steps: trace.summary.flagged_steps,
            }
        }
        Err(_) => CellResult {
            x1,
            t_max,
            labels: vec![Label::Nonstationary; checkpoints.len()],
            termination: None,
            failed: true,
            max_descent_inner: None,
            t_nonincreasing: true,
            flagged_steps: 0,
        },
    }
}

/// Runs the sweep. Cells execute on the current rayon pool; results are
/// assembled by index, so the output does not depend on the thread count.
pub fn basin_sweep(cfg: &BasinConfig, spec: &ProblemSpec) -> LabResult<BasinResult> {
    cfg.validate()?;
    if spec.dim() != 2 {
        return Err(LabError::config("basin sweeps need a 2-D problem"));
    }
    let t_maxes = cfg.t_max_values();
    let reference = spec.build(Some(cfg.t_max_max.max(spec.schedule.t_min)))?;
    let census = stationary_census(&reference, &cfg.census)?;
    let inits = cfg.initial_points();
    let checkpoints = cfg.checkpoints();
    let mut problems = Vec::with_capacity(t_maxes.len());
    for &t_max in &t_maxes {
        let problem = spec.build(Some(t_max))?;
        let grid = make_grid(spec.schedule.t_min, t_max, grid_len(cfg.solver.algorithm, cfg.iters), cfg.spacing.into())
            .map_err(|e| LabError::config(format!("basin grid: {e}")))?;
        problems.push((problem, grid));
    }
    let cells: Vec<CellResult> = (0..t_maxes.len() * inits.len())
        .into_par_iter()
        .map(|idx| {
            let (ti, ii) = (idx / inits.len(), idx % inits.len());
            let (problem, grid) = &problems[ti];
            run_cell(problem, cfg, grid, &census, &checkpoints, inits[ii], t_maxes[ti])
        })
        .collect();

    let mut rates = Vec::with_capacity(t_maxes.len() * checkpoints.len());
    for (ti, &t_max) in t_maxes.iter().enumerate() {
        let group = &cells[ti * inits.len()..(ti + 1) * inits.len()];
        for (ci, &iter) in checkpoints.iter().enumerate() {
            let n = group.len() as f64;
            let global = group.iter().filter(|c| c.labels[ci] == Label::Global).count() as f64;
            let stationary = group.iter().filter(|c| c.labels[ci].is_stationary()).count() as f64;
            rates.push(RateRow {
                t_max,
                iter,
                rate_global: global / n,
                rate_stationary: stationary / n,
            });
        }
    }

    let s = &spec.schedule;
    let metadata = BasinMetadata {
        algorithm: cfg.solver.algorithm.as_str().into(),
        lambda_policy: format!("{:?}", cfg.solver.params.policy),
        lambda_const: cfg.solver.params.lambda_const,
        iters: cfg.iters,
        resolution: cfg.resolution,
        bounds: [cfg.lower, cfg.upper],
        t_max_values: t_maxes.clone(),
        spacing: format!("{:?}", cfg.spacing).to_lowercase(),
        schedule: format!("{:?}", s.variant).to_lowercase(),
        sigma: s.sigma,
        t_min: s.t_min,
        alpha: spec.alpha.base,
        alpha_rule: format!("{:?}", spec.alpha.rule),
        tol_x: cfg.tol_x,
        tol_g: cfg.tol_g,
        global_minimizer: census.global().x.clone(),
        census_points: census.points.iter().map(|p| p.x.clone()).collect(),
        mixture_weights: spec.mixture.weights().to_vec(),
        mixture_means: (0..spec.mixture.len()).map(|k| spec.mixture.mean(k).to_vec()).collect(),
        failed_runs: cells.iter().filter(|c| c.failed).count(),
        flagged_steps: cells.iter().map(|c| c.flagged_steps).sum(),
        max_descent_inner: cells
            .iter()
            .filter_map(|c| c.max_descent_inner)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
        smoothing_nonincreasing: cells.iter().all(|c| c.t_nonincreasing),
        code_version: env!("CARGO_PKG_VERSION").into(),
    };
    Ok(BasinResult {
        checkpoints,
        cells,
        rates,
        census,
        metadata,
    })
}

impl BasinResult {
    /// Rate row for a `t_max` index and iteration.
    pub fn rate(&self, t_index: usize, iter: usize) -> Option<RateRow> {
        let ci = self.checkpoints.iter().position(|&k| k == iter)?;
        self.rates.get(t_index * self.checkpoints.len() + ci).copied()
    }

    pub fn rates_csv(&self) -> Vec<u8> {
        let rows: Vec<Vec<String>> = self
            .rates
            .iter()
            .map(|r| {
                vec![
                    r.t_max.to_string(),
                    r.iter.to_string(),
                    r.rate_global.to_string(),
                    r.rate_stationary.to_string(),
                ]
            })
            .collect();
        io::csv_bytes(&["t_max", "iter", "rate_global", "rate_stationary"], &rows)
    }

    pub fn labels_csv(&self) -> Vec<u8> {
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.x1[0].to_string(),
                    c.x1[1].to_string(),
                    c.t_max.to_string(),
                    c.final_label().as_str().to_string(),
                ]
            })
            .collect();
        io::csv_bytes(&["x1_a", "x1_b", "t_max", "label"], &rows)
    }

    pub fn metadata_toml(&self) -> String {
        toml::to_string(&self.metadata).expect("metadata serialises")
    }

    pub fn write(&self, out_dir: &std::path::Path) -> LabResult<()> {
        io::write_text(&out_dir.join("basin_rates.csv"), std::str::from_utf8(&self.rates_csv()).expect("utf8"))?;
        io::write_text(&out_dir.join("labels.csv"), std::str::from_utf8(&self.labels_csv()).expect("utf8"))?;
        io::write_text(&out_dir.join("basin_meta.toml"), &self.metadata_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::toy;

    #[test]
    fn log_spaced_t_max_hits_both_ends() {
        let cfg = BasinConfig::desk_scale();
        let ts = cfg.t_max_values();
        assert_eq!(ts.len(), 20);
        assert_eq!(ts[0], 1e-2);
        assert_eq!(ts[19], 10.0);
        let r = ts[1] / ts[0];
        assert!(ts.windows(2).all(|w| (w[1] / w[0] / r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn checkpoints_include_both_ends() {
        let mut cfg = BasinConfig::desk_scale();
        cfg.iters = 25;
        assert_eq!(cfg.checkpoints(), vec![0, 10, 20, 25]);
    }

    #[test]
    fn smoke_sweep_two_by_two() {
        let mut cfg = BasinConfig::desk_scale();
        cfg.resolution = 2;
        cfg.t_max_count = 2;
        cfg.iters = 10;
        cfg.checkpoint_stride = 5;
        cfg.census.resolution = 8;
        let res = basin_sweep(&cfg, &toy::spec()).unwrap();
        assert_eq!(res.cells.len(), 8);
        assert_eq!(res.rates.len(), 2 * 3);
        for (ti, &t) in cfg.t_max_values().iter().enumerate() {
            for &k in &res.checkpoints {
                let r = res.rate(ti, k).unwrap();
                let group: Vec<_> = res.cells.iter().filter(|c| c.t_max == t).collect();
                let ci = res.checkpoints.iter().position(|&c| c == k).unwrap();
                let g = group.iter().filter(|c| c.labels[ci] == Label::Global).count();
                let s = group.iter().filter(|c| c.labels[ci] != Label::Nonstationary).count();
                assert_eq!(r.rate_global, g as f64 / 4.0);
                assert_eq!(r.rate_stationary, s as f64 / 4.0);
                assert!(r.rate_global <= r.rate_stationary);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = BasinConfig::desk_scale();
        cfg.resolution = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = BasinConfig::desk_scale();
        cfg.upper = f64::INFINITY;
        assert!(cfg.validate().is_err());
    }
}
