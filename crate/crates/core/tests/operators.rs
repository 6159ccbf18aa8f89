mod common;

use common::{random_vec, rng};
use gnc_core::operators::estimate_norm;
use gnc_core::{build_radon, linalg, DenseOperator, LinearOperator, RadonOperator};
use proptest::prelude::*;
use rand::Rng;

fn adjoint_gap<O: LinearOperator>(op: &O, x: &[f64], y: &[f64], norm: f64) -> f64 {
    let lhs = linalg::dot(&op.apply(x).unwrap(), y);
    let rhs = linalg::dot(x, &op.adjoint(y).unwrap());
    (lhs - rhs).abs() / (linalg::norm(x) * linalg::norm(y) * norm)
}

#[test]
fn dense_adjoint_identity_random_5x7() {
    let mut r = rng(1);
    for _ in 0..100 {
        let a = DenseOperator::new(5, 7, random_vec(35, 1.0, &mut r)).unwrap();
        let x = random_vec(7, 1.0, &mut r);
        let y = random_vec(5, 1.0, &mut r);
        let lhs = linalg::dot(&a.apply(&x).unwrap(), &y);
        let rhs = linalg::dot(&x, &a.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }
}

#[test]
fn radon_adjoint_identity() {
    let mut r = rng(2);
    for (n, angles) in [(16, 12), (17, 7), (32, 30)] {
        let op = build_radon(n, angles).unwrap();
        let norm = estimate_norm(&op, 50);
        for _ in 0..100 {
            let x = random_vec(op.input_dim(), 1.0, &mut r);
            let y = random_vec(op.output_dim(), 1.0, &mut r);
            assert!(adjoint_gap(&op, &x, &y, norm) < 1e-12);
        }
    }
}

#[test]
fn radon_is_linear() {
    let mut r = rng(3);
    let op = build_radon(16, 9).unwrap();
    for _ in 0..20 {
        let x1 = random_vec(256, 1.0, &mut r);
        let x2 = random_vec(256, 1.0, &mut r);
        let (a, b) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let combo: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.apply(&combo).unwrap();
        let (y1, y2) = (op.apply(&x1).unwrap(), op.apply(&x2).unwrap());
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * y1[i] + b * y2[i])).abs() < 1e-10);
        }
        let z1 = random_vec(op.output_dim(), 1.0, &mut r);
        let z2 = random_vec(op.output_dim(), 1.0, &mut r);
        let zc: Vec<f64> = z1.iter().zip(&z2).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.adjoint(&zc).unwrap();
        let (w1, w2) = (op.adjoint(&z1).unwrap(), op.adjoint(&z2).unwrap());
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * w1[i] + b * w2[i])).abs() < 1e-10);
        }
    }
}

fn disk(n: usize, radius: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut img = vec![0.0; n * n];
    for r in 0..n {
        for col in 0..n {
            let (x, y) = (col as f64 - c, c - r as f64);
            if x * x + y * y <= radius * radius {
                img[r * n + col] = 1.0;
            }
        }
    }
    img
}

#[test]
fn disk_projection_at_angle_zero_counts_pixels_and_tracks_chord_length() {
    // With an odd side the detectors sit on pixel centres, so the angle-0
    // projection is a plain column sum.
    let n = 33;
    let radius = 12.0;
    let img = disk(n, radius);
    let op = RadonOperator::with_angles(n, vec![0.0]).unwrap();
    let sino = op.apply(&img).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    for d in 0..op.n_detectors() {
        let s = op.detector_offset(d);
        let col = s + c;
        let count = if col >= 0.0 && col < n as f64 {
            (0..n).map(|r| img[r * n + col as usize]).sum::<f64>()
        } else {
            0.0
        };
        assert!((sino[d] - count).abs() < 1e-12, "detector {d}");
        let chord = if s.abs() <= radius { 2.0 * (radius * radius - s * s).sqrt() } else { 0.0 };
        assert!((sino[d] - chord).abs() <= 2.0, "detector {d}: {} vs chord {chord}", sino[d]);
    }
}

#[test]
fn disk_sinogram_is_invariant_under_quarter_turns() {
    // A pixelised disk is exactly symmetric under the dihedral group of the
    // grid, so angles related by quarter turns and reflections agree exactly.
    let n = 31;
    let img = disk(n, 11.0);
    let quarter = core::f64::consts::FRAC_PI_2;
    let pairs = [(0.0, quarter), (0.3, quarter - 0.3), (0.3, quarter + 0.3), (0.7, core::f64::consts::PI - 0.7)];
    for (a, b) in pairs {
        let op = RadonOperator::with_angles(n, vec![a, b]).unwrap();
        let s = op.apply(&img).unwrap();
        let m = op.n_detectors();
        for d in 0..m {
            // Reflections reverse the detector axis.
            let other = if (a + b - quarter).abs() < 1e-12 || (a + b - core::f64::consts::PI).abs() < 1e-12 {
                s[m + (m - 1 - d)]
            } else {
                s[m + d]
            };
            assert!((s[d] - other).abs() < 1e-8, "angles ({a}, {b}) detector {d}: {} vs {other}", s[d]);
        }
    }
}

#[test]
fn smooth_radial_image_projects_nearly_identically_at_every_angle() {
    let n = 48;
    let c = (n as f64 - 1.0) / 2.0;
    let sigma = 5.0;
    let img: Vec<f64> = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64 - c, c - (i / n) as f64);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let op = build_radon(n, 36).unwrap();
    let sino = op.apply(&img).unwrap();
    let m = op.n_detectors();
    let peak = sino.iter().cloned().fold(0.0, f64::max);
    let analytic_peak = (2.0 * core::f64::consts::PI).sqrt() * sigma;
    assert!((peak / analytic_peak - 1.0).abs() < 1e-2);
    for a in 1..36 {
        for d in 0..m {
            let diff = (sino[a * m + d] - sino[d]).abs();
            assert!(diff < 2e-2 * peak, "angle {a} detector {d}: {diff}");
        }
    }
}

#[test]
fn radon_shape_and_errors() {
    let op = build_radon(16, 12).unwrap();
    assert_eq!(op.n_detectors(), 23);
    assert_eq!(op.output_dim(), 12 * 23);
    assert!(build_radon(1, 3).is_err());
    assert!(build_radon(8, 0).is_err());
    assert!(op.apply(&[0.0; 10]).is_err());
    assert!(op.adjoint(&[0.0; 10]).is_err());
    let angles = op.angles();
    assert_eq!(angles[0], 0.0);
    assert!(angles.iter().all(|&a| (0.0..core::f64::consts::PI).contains(&a)));
}

#[test]
fn operators_are_shareable_across_threads() {
    let op = build_radon(16, 6).unwrap();
    let x = vec![1.0; 256];
    let reference = op.apply(&x).unwrap();
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(op.apply(&x).unwrap(), reference));
        }
    });
}

proptest! {
    #[test]
    fn dense_adjoint_identity_any_shape(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let a = DenseOperator::new(rows, cols, random_vec(rows * cols, 2.0, &mut r)).unwrap();
        let x = random_vec(cols, 1.0, &mut r);
        let y = random_vec(rows, 1.0, &mut r);
        let lhs = linalg::dot(&a.apply(&x).unwrap(), &y);
        let rhs = linalg::dot(&x, &a.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn radon_adjoint_identity_any_geometry(
        n in 2usize..12,
        angles in prop::collection::vec(0.0f64..core::f64::consts::PI, 1..6),
        seed in any::<u64>(),
    ) {
        let op = RadonOperator::with_angles(n, angles).unwrap();
        let mut r = rng(seed);
        let x = random_vec(op.input_dim(), 1.0, &mut r);
        let y = random_vec(op.output_dim(), 1.0, &mut r);
        let norm = estimate_norm(&op, 30).max(1e-12);
        prop_assert!(adjoint_gap(&op, &x, &y, norm) < 1e-6);
    }
}
