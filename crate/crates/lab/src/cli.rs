//! Subcommand implementations behind the `gnc` binary.

use std::path::{Path, PathBuf};

use gnc_core::{linalg, make_grid, Termination};

use crate::basin::{basin_sweep, grid_len, BasinConfig};
use crate::census::{stationary_census, CensusSettings};
use crate::config::{Algorithm, Config, Solver, Spacing, TraceProblem};
use crate::error::{LabError, LabResult};
use crate::gradcheck::gradient_check;
use crate::image::Image;
use crate::io;
use crate::metrics::psnr;
use crate::problem::ProblemSpec;
use crate::recon::{self, ReconBench, ReconSetup};
use crate::seeds::{rng, Purpose};

#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    /// Loads the config and sizes the global thread pool.
    pub fn new(config: Option<&Path>, out: PathBuf, seed: u64, threads: Option<usize>) -> LabResult<Self> {
        let config = match config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(n) = threads {
            if n == 0 {
                return Err(LabError::config("--threads must be at least 1"));
            }
            // A second initialisation in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(Self { config, out, seed })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn basin(ctx: &Context) -> LabResult<()> {
    let cfg = BasinConfig::from_config(&ctx.config)?;
    let spec = ProblemSpec::from_config(&ctx.config)?;
    let result = basin_sweep(&cfg, &spec)?;
    result.write(&ctx.out)?;
    for (ti, t_max) in cfg.t_max_values().iter().enumerate() {
        let r = result.rate(ti, cfg.iters).expect("final checkpoint");
        println!(
            "t_max={t_max:.4e} rate_global={:.4} rate_stationary={:.4}",
            r.rate_global, r.rate_stationary
        );
    }
    Ok(())
}

pub fn census(ctx: &Context) -> LabResult<()> {
    let spec = ProblemSpec::from_config(&ctx.config)?;
    let problem = spec.build(None)?;
    let c = &ctx.config.census;
    let d = CensusSettings::default();
    let settings = CensusSettings {
        resolution: c.resolution.unwrap_or(d.resolution),
        lower: c.x_min.unwrap_or(d.lower),
        upper: c.x_max.unwrap_or(d.upper),
    };
    let census = stationary_census(&problem, &settings)?;
    let rows: Vec<Vec<String>> = census
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                p.x[0].to_string(),
                p.x[1].to_string(),
                p.f.to_string(),
                p.grad_norm.to_string(),
                p.hits.to_string(),
                if i == 0 { "global" } else { "stationary_nonglobal" }.to_string(),
            ]
        })
        .collect();
    io::write_csv(&ctx.path("census.csv"), &["x_a", "x_b", "f", "grad_norm", "hits", "label"], &rows)?;
    let g = census.global();
    println!("{} stationary points; global minimiser ({}, {}) with f = {}", census.points.len(), g.x[0], g.x[1], g.f);
    Ok(())
}

pub fn gradcheck(ctx: &Context) -> LabResult<()> {
    let spec = ProblemSpec::from_config(&ctx.config)?;
    let problem = spec.build(None)?;
    let g = &ctx.config.gradcheck;
    let samples = g.samples.unwrap_or(200);
    let tol = g.tolerance.unwrap_or(1e-5);
    let radius = g.radius.unwrap_or(10.0);
    let results = gradient_check(&problem, samples, radius, &mut rng(ctx.seed, Purpose::Init, 0))?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), s.t.to_string(), s.rel_err.to_string()])
        .collect();
    io::write_csv(&ctx.path("gradcheck.csv"), &["sample", "t", "rel_err"], &rows)?;
    let worst = results.iter().map(|s| s.rel_err).fold(0.0, f64::max);
    println!("{samples} samples, max relative error {worst:e} (tolerance {tol:e})");
    if !(worst < tol) {
        return Err(LabError::numeric(format!("gradient check failed: {worst:e} >= {tol:e}")));
    }
    Ok(())
}

fn recon_solver(cfg: &Config, bench: &ReconBench) -> LabResult<Solver> {
    let alg = cfg.optimizer.algorithm.unwrap_or(Algorithm::GradientLike);
    cfg.optimizer.resolve(&bench.default_solver(alg)?)
}

pub fn recon(ctx: &Context) -> LabResult<()> {
    let setup = ReconSetup::from_config(&ctx.config)?;
    let bench = ReconBench::new(setup, ctx.seed)?;
    let solver = recon_solver(&ctx.config, &bench)?;
    let write_runs = ctx.config.recon.write_runs.unwrap_or(false);
    let runs = bench.batch(&Solver {
        params: gnc_core::OptimizerParams {
            record_iterations: write_runs,
            ..solver.params.clone()
        },
        ..solver.clone()
    })?;
    io::write_text(&ctx.path("metrics.csv"), &String::from_utf8(recon::metrics_csv(&runs)).expect("utf8"))?;
    let summary = recon::summarize(&runs);
    io::write_text(
        &ctx.path("summary.csv"),
        &String::from_utf8(recon::summary_csv(solver.algorithm, &summary)).expect("utf8"),
    )?;
    for (k, truth) in bench.truths.iter().enumerate() {
        io::write_pgm(&ctx.path(&format!("truth_{k}.pgm")), truth)?;
    }
    if write_runs {
        for r in &runs {
            let stem = format!("img{}_seed{}", r.image, r.seed);
            io::write_text(
                &ctx.path(&format!("trace_{stem}.csv")),
                &String::from_utf8(recon::trace_csv(&r.trace)).expect("utf8"),
            )?;
            io::write_pgm(&ctx.path(&format!("recon_{stem}.pgm")), &r.recon)?;
        }
    }
    println!(
        "{}: PSNR {:.3} dB (std {:.4}), SSIM {:.4} (std {:.4}) over {} runs",
        solver.algorithm.as_str(),
        summary.psnr.mean,
        summary.psnr.mean_std,
        summary.ssim.mean,
        summary.ssim.mean_std,
        runs.len()
    );
    let failed = runs.iter().filter(|r| r.trace.termination == Termination::NumericFailure).count();
    if failed > 0 {
        return Err(LabError::numeric(format!("{failed} reconstruction runs hit non-finite values")));
    }
    Ok(())
}

pub fn trace_demo(ctx: &Context) -> LabResult<()> {
    let cfg = &ctx.config;
    let trace = match cfg.trace.problem.unwrap_or(TraceProblem::Toy) {
        TraceProblem::Toy => {
            let spec = ProblemSpec::from_config(cfg)?;
            let problem = spec.build(None)?;
            let defaults = Solver {
                algorithm: Algorithm::GradientLike,
                params: gnc_core::OptimizerParams {
                    max_iters: 1300,
                    ..Default::default()
                },
            };
            let solver = cfg.optimizer.resolve(&defaults)?;
            let x1 = cfg.trace.x1.clone().unwrap_or_else(|| vec![-8.0, -8.0]);
            if x1.len() != problem.dim() {
                return Err(LabError::config(format!("trace.x1 needs {} entries", problem.dim())));
            }
            let spacing = cfg.grid.spacing.unwrap_or(Spacing::Linear);
            let count = cfg.grid.count.unwrap_or(grid_len(solver.algorithm, solver.params.max_iters));
            let grid = make_grid(problem.t_min(), problem.t_max(), count, spacing.into())
                .map_err(|e| LabError::config(format!("grid: {e}")))?;
            let trace = match solver.algorithm {
                Algorithm::GncFlow => gnc_core::gnc_flow(&problem, &x1, &grid, &solver.params)?,
                Algorithm::GradientLike => gnc_core::gradient_like(&problem, &x1, &grid, &solver.params)?,
                Algorithm::GradientDescent => gnc_core::gradient_descent(&problem, &x1, &solver.params)?,
            };
            println!("final iterate {:?}, |grad f| = {:e}", trace.x, linalg::norm(&problem.gradient(&trace.x)?));
            trace
        }
        TraceProblem::Recon => {
            let setup = ReconSetup {
                n_images: 1,
                n_seeds: 1,
                ..ReconSetup::from_config(cfg)?
            };
            let bench = ReconBench::new(setup, ctx.seed)?;
            let mut solver = recon_solver(cfg, &bench)?;
            solver.params.record_iterations = true;
            solver.params.iterate_stride = 1;
            let run = bench.run(&solver, 0, 0)?;
            let n = bench.setup.n_px;
            let truth = &bench.truths[0];
            let x1 = Image::new(n, n, bench.initial_point(0))?;
            let mut rows = vec![vec!["0".to_string(), psnr(&x1, truth, 1.0)?.to_string()]];
            for c in &run.trace.checkpoints {
                rows.push(vec![c.steps.to_string(), psnr(&Image::new(n, n, c.x.clone())?, truth, 1.0)?.to_string()]);
            }
            io::write_csv(&ctx.path("psnr.csv"), &["iter", "psnr"], &rows)?;
            io::write_pgm(&ctx.path("truth.pgm"), truth)?;
            io::write_pgm(&ctx.path("recon.pgm"), &run.recon)?;
            println!("PSNR {:.3} dB, SSIM {:.4}", run.psnr, run.ssim);
            run.trace
        }
    };
    io::write_text(&ctx.path("trace.csv"), &String::from_utf8(recon::trace_csv(&trace)).expect("utf8"))?;
    println!("{} iterations, termination {}", trace.summary.steps, trace.termination.as_str());
    if trace.termination == Termination::NumericFailure {
        return Err(LabError::numeric("trace run hit non-finite values"));
    }
    Ok(())
}
