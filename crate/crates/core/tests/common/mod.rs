#![allow(dead_code)]

use gnc_core::{
    Covariance, DenseOperator, DiffusedMixture, DiffusionSchedule, GaussianMixture, InverseProblem,
    RegularizationWeight,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Toy = InverseProblem<DenseOperator, DiffusedMixture>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toy_mixture() -> GaussianMixture {
    let means = [[1.0, 1.0], [-4.0, 3.0], [4.0, -3.0], [-3.0, -4.0], [3.0, 4.0]];
    GaussianMixture::new(
        vec![1.0; 5],
        means.iter().map(|m| m.to_vec()).collect(),
        vec![Covariance::Isotropic(0.5); 5],
    )
    .unwrap()
}

pub fn ve(t_max: f64) -> DiffusionSchedule {
    DiffusionSchedule::variance_exploding(10.0, 1e-3, t_max).unwrap()
}

pub fn toy_operator() -> DenseOperator {
    DenseOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap()
}

pub fn toy(t_max: f64) -> Toy {
    let s = ve(t_max);
    InverseProblem::new(
        toy_operator(),
        vec![2.0, 0.0],
        DiffusedMixture::new(toy_mixture(), s),
        s,
        RegularizationWeight::constant(5.0),
    )
    .unwrap()
}

/// Random SPD matrix `L Lᵀ + 0.2 I`, row-major.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let l: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
        }
        m[i * n + i] += 0.2;
    }
    m
}

/// Random `k`-component full-covariance mixture in `n` dimensions.
pub fn random_mixture<R: Rng>(n: usize, k: usize, rng: &mut R) -> GaussianMixture {
    let weights = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let means = (0..k)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let covs = (0..k).map(|_| Covariance::Full(random_spd(n, rng))).collect();
    GaussianMixture::new(weights, means, covs).unwrap()
}

pub fn random_vec<R: Rng>(n: usize, half_width: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let s = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    if s == 0.0 {
        d
    } else {
        d / s
    }
}
