use gnc_core::{linalg, LinearOperator};
use gnc_lab::basin::{basin_sweep, BasinConfig};
use gnc_lab::census::{classify, stationary_census, CensusSettings, Label};
use gnc_lab::config::Algorithm;
use gnc_lab::phantom::generate_ellipse_phantom;
use gnc_lab::problem::toy;
use gnc_lab::recon::{ReconBench, ReconSetup};

fn small_recon(noise: f64) -> ReconSetup {
    ReconSetup {
        n_px: 16,
        n_angles: 12,
        noise,
        n_images: 2,
        n_seeds: 2,
        prior_samples: 20,
        ..ReconSetup::desk_scale()
    }
}

#[test]
fn phantom_statistics_are_stable_across_seeds() {
    let means: Vec<f64> = (0..1000u64)
        .map(|s| {
            let img = generate_ellipse_phantom(s, 16).unwrap();
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
            img.data().iter().sum::<f64>() / 256.0
        })
        .collect();
    let first = means[..500].iter().sum::<f64>() / 500.0;
    let second = means[500..].iter().sum::<f64>() / 500.0;
    assert!(first > 0.02 && first < 0.9, "mean intensity {first}");
    assert!((first - second).abs() < 0.03, "{first} vs {second}");
    // Seeds actually change the picture.
    assert!(means.windows(2).filter(|w| w[0] != w[1]).count() > 900);
}

#[test]
fn census_is_stable_under_refinement() {
    let p = toy::problem(10.0).unwrap();
    let coarse = stationary_census(&p, &CensusSettings::default()).unwrap();
    let fine = stationary_census(&p, &CensusSettings { resolution: 30, ..Default::default() }).unwrap();
    assert_eq!(coarse.points.len(), fine.points.len());
    for (a, b) in coarse.points.iter().zip(&fine.points) {
        assert!(linalg::norm(&[a.x[0] - b.x[0], a.x[1] - b.x[1]]) < 1e-3);
        assert!(a.grad_norm < 1e-6 && b.grad_norm < 1e-6);
    }
    let g = coarse.global();
    assert!((g.x[0] - 1.0).abs() < 0.05 && (g.x[1] - 1.0).abs() < 0.05);
    let hits = |c: &gnc_lab::census::StationaryCensus| c.points.iter().map(|p| p.hits).sum::<usize>();
    assert!(hits(&coarse) <= 400 && hits(&fine) <= 900 && hits(&fine) > hits(&coarse));
}

#[test]
fn classify_examples() {
    let p = toy::problem(10.0).unwrap();
    let census = stationary_census(&p, &CensusSettings::default()).unwrap();
    let g = census.global().x.clone();
    assert_eq!(classify(&g, &p, &census, 0.1, 1e-4), Label::Global);
    assert_eq!(classify(&[g[0] + 0.05, g[1]], &p, &census, 0.1, 1e-4), Label::Global);
    let local = census.points.iter().find(|c| linalg::norm(&[c.x[0] + 4.0, c.x[1] - 3.0]) < 0.5).expect("a stationary point near (-4, 3)");
    assert_eq!(classify(&local.x, &p, &census, 0.1, 1e-4), Label::StationaryNonglobal);
    assert_eq!(classify(&[8.0, 8.0], &p, &census, 0.1, 1e-4), Label::Nonstationary);
    assert_eq!(classify(&[f64::NAN, 0.0], &p, &census, 0.1, 1e-4), Label::Nonstationary);
}

#[test]
fn small_basin_sweep_invariants() {
    let mut cfg = BasinConfig::desk_scale();
    cfg.resolution = 4;
    cfg.t_max_count = 2;
    cfg.iters = 50;
    cfg.solver.params.max_iters = 50;
    cfg.census.resolution = 8;
    let result = basin_sweep(&cfg, &toy::spec()).unwrap();
    let checkpoints = cfg.checkpoints();
    assert_eq!(result.cells.len(), 16 * 2);
    assert_eq!(result.rates.len(), 2 * checkpoints.len());
    for r in &result.rates {
        assert!(0.0 <= r.rate_global && r.rate_global <= r.rate_stationary && r.rate_stationary <= 1.0);
    }
    for c in &result.cells {
        assert_eq!(c.labels.len(), checkpoints.len());
    }
    assert!(result.metadata.smoothing_nonincreasing);
    assert_eq!(result.metadata.failed_runs, 0);
    let again = basin_sweep(&cfg, &toy::spec()).unwrap();
    assert_eq!(result.rates_csv(), again.rates_csv());
    assert_eq!(result.labels_csv(), again.labels_csv());
}

#[test]
fn recon_batch_is_deterministic() {
    let bench = ReconBench::new(small_recon(0.05), 3).unwrap();
    let mut solver = bench.default_solver(Algorithm::GradientLike).unwrap();
    solver.params.max_iters = 40;
    let a = bench.batch(&solver).unwrap();
    let b = ReconBench::new(small_recon(0.05), 3).unwrap().batch(&solver).unwrap();
    assert_eq!(a.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.image, x.seed), (y.image, y.seed));
        assert_eq!(x.psnr.to_bits(), y.psnr.to_bits());
        assert_eq!(x.recon, y.recon);
    }
    let other = ReconBench::new(small_recon(0.05), 4).unwrap();
    assert_ne!(other.truths[0], bench.truths[0]);
}

#[test]
fn noiseless_recon_descends_and_fits_data() {
    let bench = ReconBench::new(small_recon(0.0), 0).unwrap();
    let mut solver = bench.default_solver(Algorithm::GradientLike).unwrap();
    solver.params.max_iters = 80;
    let run = bench.run(&solver, 0, 0).unwrap();
    let fs: Vec<f64> = run.trace.records.iter().map(|r| r.f).collect();
    assert!(!fs.is_empty());
    assert!(fs.windows(2).all(|w| w[1] <= w[0]), "f increased");
    let y = bench.operator.apply(bench.truths[0].data()).unwrap();
    let residual = |x: &[f64]| {
        let ax = bench.operator.apply(x).unwrap();
        linalg::norm(&ax.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>())
    };
    let start = residual(&bench.initial_point(0));
    let end = residual(run.recon.data());
    assert!(end < 0.1 * start, "residual {start} -> {end}");
}
