use std::path::Path;
use std::process::{Command, Output};

fn gnc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn gradcheck_succeeds_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "[gradcheck]\nsamples = 20\n");
    let out = gnc(dir.path(), &["--config", &cfg, "--out", "o", "gradcheck"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/gradcheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[basin]\nresolutoin = 5\n");
    assert_eq!(gnc(dir.path(), &["--config", &unknown, "basin"]).status.code(), Some(2));
    let invalid = write(dir.path(), "v.toml", "[basin]\nresolution = 1\n");
    assert_eq!(gnc(dir.path(), &["--config", &invalid, "basin"]).status.code(), Some(2));
    let syntax = write(dir.path(), "s.toml", "[basin\n");
    assert_eq!(gnc(dir.path(), &["--config", &syntax, "census"]).status.code(), Some(2));
    assert_eq!(gnc(dir.path(), &["--config", "missing.toml", "census"]).status.code(), Some(2));
    assert_eq!(gnc(dir.path(), &["--threads", "0", "census"]).status.code(), Some(2));
    assert_eq!(gnc(dir.path(), &["no-such-command"]).status.code(), Some(2));
    let bad_schedule = write(dir.path(), "b.toml", "[schedule]\nsigma = 0.5\n");
    assert_eq!(gnc(dir.path(), &["--config", &bad_schedule, "gradcheck"]).status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let strict = write(dir.path(), "g.toml", "[gradcheck]\nsamples = 5\ntolerance = 1e-300\n");
    assert_eq!(gnc(dir.path(), &["--config", &strict, "gradcheck"]).status.code(), Some(3));
    let diverge = write(
        dir.path(),
        "d.toml",
        "[optimizer]\nalgorithm = \"gnc_flow\"\nlambda_policy = \"constant\"\nlambda_const = 1000.0\nmax_iters = 200\n",
    );
    let out = gnc(dir.path(), &["--config", &diverge, "--out", "d", "trace-demo"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // The trace up to the failure is still written.
    assert!(dir.path().join("d/trace.csv").exists());
}

#[test]
fn outputs_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[basin]\nresolution = 3\nt_max_count = 2\niters = 20\ncensus_resolution = 4\n\n\
         [recon]\nn_px = 16\nn_angles = 8\nn_images = 1\nn_seeds = 2\nprior_samples = 10\n\n\
         [optimizer]\nmax_iters = 10\n",
    );
    for cmd in ["basin", "recon", "trace-demo", "census"] {
        let out = gnc(dir.path(), &["--config", &cfg, "--out", "o", cmd]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let o = dir.path().join("o");
    assert_eq!(header(&o.join("basin_rates.csv")), "t_max,iter,rate_global,rate_stationary");
    assert_eq!(header(&o.join("labels.csv")), "x1_a,x1_b,t_max,label");
    assert_eq!(header(&o.join("metrics.csv")), "image_id,seed,psnr,ssim");
    assert_eq!(
        header(&o.join("trace.csv")),
        "iter,t,lambda,f,F,grad_f_norm,descent_inner,flags"
    );
    let labels = std::fs::read_to_string(o.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1 + 9 * 2);
    let pgm = std::fs::read_to_string(o.join("truth_0.pgm")).unwrap();
    assert!(pgm.starts_with("P2"));
    assert!(pgm.contains("65535"));
    assert!(o.join("basin_meta.toml").exists());
}
