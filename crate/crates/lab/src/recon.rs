//! Desk-scale tomography benchmark: ellipse phantoms, parallel-beam Radon
//! data with relative Gaussian noise, and an empirical mixture prior built
//! from independent phantoms.

use gnc_core::{
    empirical_prior, gnc_flow, gradient_descent, gradient_like, linalg, make_grid, DiffusedMixture, InverseProblem,
    LinearOperator, RadonOperator, RegularizationWeight, RunTrace,
};
use rand::Rng;

use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::basin::grid_len;
use crate::config::{build_schedule, Algorithm, Config, ScheduleDefaults, Solver, Spacing, Variant};
use crate::error::{LabError, LabResult};
use crate::image::Image;
use crate::io;
use crate::metrics::{psnr, ssim};
use crate::phantom::generate_ellipse_phantom;
use crate::seeds::{derive_seed, rng, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct ReconSetup {
    pub n_px: usize,
    pub n_angles: usize,
    /// `‖ε‖ / ‖Ax‖`.
    pub noise: f64,
    pub n_images: usize,
    pub n_seeds: usize,
    pub prior_samples: usize,
    pub bandwidth: f64,
    /// Standard deviation of the i.i.d. Gaussian initial images.
    pub init_scale: f64,
    pub schedule: ScheduleDefaults,
    pub alpha: RegularizationWeight,
    pub spacing: Spacing,
}

impl ReconSetup {
    pub const DEFAULT_SCHEDULE: ScheduleDefaults = ScheduleDefaults {
        variant: Variant::Vp,
        sigma: 10.0,
        beta_min: 0.1,
        beta_max: 20.0,
        t_min: 1e-3,
        t_max: 1.0,
    };

    pub fn desk_scale() -> Self {
        Self {
            n_px: 32,
            n_angles: 30,
            noise: 0.05,
            n_images: 5,
            n_seeds: 10,
            prior_samples: 200,
            bandwidth: 0.2,
            init_scale: 3.0,
            schedule: Self::DEFAULT_SCHEDULE,
            alpha: RegularizationWeight::nu_over_gamma(10.0),
            spacing: Spacing::Log,
        }
    }

    pub fn from_config(cfg: &Config) -> LabResult<Self> {
        let d = Self::desk_scale();
        let r = &cfg.recon;
        let out = Self {
            n_px: r.n_px.unwrap_or(d.n_px),
            n_angles: r.n_angles.unwrap_or(d.n_angles),
            noise: r.noise.unwrap_or(d.noise),
            n_images: r.n_images.unwrap_or(d.n_images),
            n_seeds: r.n_seeds.unwrap_or(d.n_seeds),
            prior_samples: r.prior_samples.unwrap_or(d.prior_samples),
            bandwidth: r.bandwidth.unwrap_or(d.bandwidth),
            init_scale: r.init_scale.unwrap_or(d.init_scale),
            schedule: cfg.schedule.resolve(d.schedule),
            alpha: cfg.alpha.resolve(d.alpha),
            spacing: cfg.grid.spacing.unwrap_or(d.spacing),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |m: &str| Err(LabError::config(format!("recon: {m}")));
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a finite non-negative fraction");
        }
        if self.n_images == 0 || self.n_seeds == 0 || self.prior_samples == 0 || self.n_angles == 0 {
            return bad("image, seed, prior sample and angle counts must be positive");
        }
        if !(self.bandwidth > 0.0) || !(self.init_scale >= 0.0) {
            return bad("bandwidth must be > 0 and init_scale >= 0");
        }
        if !(self.alpha.base > 0.0) {
            return bad("alpha base must be > 0");
        }
        build_schedule(&self.schedule, None)?;
        Ok(())
    }

    /// Default solver for each algorithm: 300 Armijo–BB iterations for the
    /// gradient-like method and gradient descent, 1200 constant steps for the
    /// GNC flow. The flow step here is a placeholder; see
    /// [`ReconBench::default_solver`].
    pub fn default_solver(algorithm: Algorithm) -> Solver {
        let base = gnc_core::OptimizerParams {
            record_iterations: true,
            ..Default::default()
        };
        let params = match algorithm {
            Algorithm::GncFlow => gnc_core::OptimizerParams {
                policy: gnc_core::StepPolicy::Constant,
                max_iters: 1200,
                ..base
            },
            _ => gnc_core::OptimizerParams { max_iters: 300, ..base },
        };
        Solver { algorithm, params }
    }
}

/// Phantoms, data and prior for one seed.
#[derive(Debug, Clone)]
pub struct ReconBench {
    pub setup: ReconSetup,
    pub seed: u64,
    pub operator: RadonOperator,
    pub prior: DiffusedMixture,
    pub truths: Vec<Image>,
    pub measurements: Vec<Vec<f64>>,
}

impl ReconBench {
    pub fn new(setup: ReconSetup, seed: u64) -> LabResult<Self> {
        setup.validate()?;
        let operator = gnc_core::build_radon(setup.n_px, setup.n_angles)?;
        let samples = (0..setup.prior_samples as u64)
            .map(|j| generate_ellipse_phantom(derive_seed(seed, Purpose::PriorPhantom, j), setup.n_px).map(Image::into_data))
            .collect::<LabResult<Vec<_>>>()?;
        let schedule = build_schedule(&setup.schedule, None)?;
        let prior = DiffusedMixture::new(empirical_prior(&samples, setup.bandwidth)?, schedule);
        let mut truths = Vec::with_capacity(setup.n_images);
        let mut measurements = Vec::with_capacity(setup.n_images);
        for k in 0..setup.n_images as u64 {
            let truth = generate_ellipse_phantom(derive_seed(seed, Purpose::TestPhantom, k), setup.n_px)?;
            let clean = operator.apply(truth.data())?;
            measurements.push(add_relative_noise(&clean, setup.noise, &mut rng(seed, Purpose::Noise, k)));
            truths.push(truth);
        }
        Ok(Self {
            setup,
            seed,
            operator,
            prior,
            truths,
            measurements,
        })
    }

    pub fn problem(&self, image: usize) -> LabResult<InverseProblem<&RadonOperator, &DiffusedMixture>> {
        let schedule = *self.prior.schedule();
        Ok(InverseProblem::new(
            &self.operator,
            self.measurements[image].clone(),
            &self.prior,
            schedule,
            self.setup.alpha,
        )?)
    }

    /// Initial image for seed index `s`, shared by every algorithm and image.
    pub fn initial_point(&self, s: usize) -> Vec<f64> {
        let mut r = rng(self.seed, Purpose::Init, s as u64);
        let n = self.operator.input_dim();
        (0..n)
            .map(|_| self.setup.init_scale * r.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// [`ReconSetup::default_solver`] with the GNC-flow step set to
    /// [`Self::stable_flow_step`].
    pub fn default_solver(&self, algorithm: Algorithm) -> LabResult<Solver> {
        let mut solver = ReconSetup::default_solver(algorithm);
        if algorithm == Algorithm::GncFlow {
            solver.params.lambda_const = self.stable_flow_step()?;
        }
        Ok(solver)
    }

    /// Constant GNC-flow step that keeps the first iteration stable:
    /// `1 / (t_max·(‖A‖² + α_{t_max}/(γ²h² + ν²)))`, the inverse of a bound on
    /// the curvature of `t_max·F(·, t_max)`.
    pub fn stable_flow_step(&self) -> LabResult<f64> {
        let t_max = self.setup.schedule.t_max;
        let schedule = self.prior.schedule();
        let k = schedule.kernel_params(t_max)?;
        let alpha = gnc_core::alpha_at(self.setup.alpha.base, schedule, t_max, self.setup.alpha.rule)?;
        let norm = gnc_core::operators::estimate_norm(&self.operator, 100);
        let h2 = self.setup.bandwidth * self.setup.bandwidth;
        Ok(1.0 / (t_max * (norm * norm + alpha / (k.gamma * k.gamma * h2 + k.nu_sq))))
    }

    pub fn run(&self, solver: &Solver, image: usize, s: usize) -> LabResult<ReconRun> {
        let problem = self.problem(image)?;
        let x1 = self.initial_point(s);
        let trace = match solver.algorithm {
            Algorithm::GradientDescent => gradient_descent(&problem, &x1, &solver.params)?,
            alg => {
                let count = grid_len(alg, solver.params.max_iters);
                let grid = make_grid(self.setup.schedule.t_min, self.setup.schedule.t_max, count, self.setup.spacing.into())
                    .map_err(|e| LabError::config(format!("recon grid: {e}")))?;
                if alg == Algorithm::GncFlow {
                    gnc_flow(&problem, &x1, &grid, &solver.params)?
                } else {
                    gradient_like(&problem, &x1, &grid, &solver.params)?
                }
            }
        };
        let n = self.setup.n_px;
        let recon = Image::new(n, n, trace.x.clone())?;
        let truth = &self.truths[image];
        Ok(ReconRun {
            image,
            seed: s,
            psnr: psnr(&recon, truth, 1.0)?,
            ssim: ssim(&recon, truth, 1.0)?,
            recon,
            trace,
        })
    }

    /// Every image × seed pair, in image-major order.
    pub fn batch(&self, solver: &Solver) -> LabResult<Vec<ReconRun>> {
        let pairs: Vec<(usize, usize)> = (0..self.setup.n_images)
            .flat_map(|k| (0..self.setup.n_seeds).map(move |s| (k, s)))
            .collect();
        pairs.into_par_iter().map(|(k, s)| self.run(solver, k, s)).collect()
    }
}

/// `clean + ε` with white Gaussian `ε` rescaled to `‖ε‖ = level·‖clean‖`.
pub fn add_relative_noise<R: Rng>(clean: &[f64], level: f64, rng: &mut R) -> Vec<f64> {
    let mut eps: Vec<f64> = (0..clean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let norm = linalg::norm(&eps);
    let scale = if norm > 0.0 { level * linalg::norm(clean) / norm } else { 0.0 };
    clean.iter().zip(eps.iter_mut()).map(|(c, e)| c + scale * *e).collect()
}

#[derive(Debug, Clone)]
pub struct ReconRun {
    pub image: usize,
    pub seed: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub recon: Image,
    pub trace: RunTrace,
}

/// Mean of a metric and the mean over images of its per-image standard
/// deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSummary {
    pub psnr: MetricSummary,
    pub ssim: MetricSummary,
}

fn summarize_metric(runs: &[ReconRun], value: impl Fn(&ReconRun) -> f64) -> MetricSummary {
    let mean = runs.iter().map(&value).sum::<f64>() / runs.len() as f64;
    let mut images: Vec<usize> = runs.iter().map(|r| r.image).collect();
    images.dedup();
    let stds: Vec<f64> = images
        .iter()
        .map(|&k| {
            let vals: Vec<f64> = runs.iter().filter(|r| r.image == k).map(&value).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64).sqrt()
        })
        .collect();
    MetricSummary {
        mean,
        mean_std: stds.iter().sum::<f64>() / stds.len() as f64,
    }
}

pub fn summarize(runs: &[ReconRun]) -> BatchSummary {
    BatchSummary {
        psnr: summarize_metric(runs, |r| r.psnr),
        ssim: summarize_metric(runs, |r| r.ssim),
    }
}

pub fn metrics_csv(runs: &[ReconRun]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| vec![r.image.to_string(), r.seed.to_string(), r.psnr.to_string(), r.ssim.to_string()])
        .collect();
    io::csv_bytes(&["image_id", "seed", "psnr", "ssim"], &rows)
}

/// Table with one `mean` and one `std` row per metric.
pub fn summary_csv(algorithm: Algorithm, summary: &BatchSummary) -> Vec<u8> {
    let rows = vec![
        vec![algorithm.as_str().into(), "mean".into(), summary.psnr.mean.to_string(), summary.ssim.mean.to_string()],
        vec![algorithm.as_str().into(), "std".into(), summary.psnr.mean_std.to_string(), summary.ssim.mean_std.to_string()],
    ];
    io::csv_bytes(&["algorithm", "statistic", "psnr", "ssim"], &rows)
}

pub fn trace_csv(trace: &RunTrace) -> Vec<u8> {
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                r.t.to_string(),
                r.lambda.to_string(),
                r.f.to_string(),
                r.smoothed.to_string(),
                r.grad_f_norm.to_string(),
                r.descent_inner.to_string(),
                r.flags.to_string(),
            ]
        })
        .collect();
    io::csv_bytes(&["iter", "t", "lambda", "f", "F", "grad_f_norm", "descent_inner", "flags"], &rows)
}
