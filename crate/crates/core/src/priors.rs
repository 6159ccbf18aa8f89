//! Gaussian-mixture priors and their diffusion-smoothed versions.
//!
//! Pushing `π = Σ_k w_k N(μ_k, Σ_k)` through the kernel `N(γ_t x₀, ν_t² I)`
//! gives again a mixture, with means `γ_t μ_k` and covariances
//! `γ_t² Σ_k + ν_t² I`. Log-density, score and energy of `p_t` are therefore
//! exact, which makes the mixture a drop-in stand-in for a learned score
//! model.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_len;
use crate::linalg::{self, require_positive};
use crate::schedules::{DiffusionSchedule, KernelParams};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Covariance of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `v · I`
    Isotropic(f64),
    /// Row-major symmetric positive definite `n×n` matrix.
    Full(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Isotropic { var: f64 },
    Full { chol: Vec<f64>, log_det: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    mean: Vec<f64>,
    cov: Covariance,
    factor: Factor,
}

/// A finite Gaussian mixture with strictly positive, normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<Component>,
}

fn factorize(cov: &Covariance, dim: usize, index: usize) -> Result<Factor> {
    match cov {
        Covariance::Isotropic(var) => {
            if *var > 0.0 && var.is_finite() {
                Ok(Factor::Isotropic { var: *var })
            } else {
                Err(Error::NotPositiveDefinite { component: index })
            }
        }
        Covariance::Full(m) => {
            check_len("covariance entries", dim * dim, m.len())?;
            for i in 0..dim {
                for j in 0..i {
                    if m[i * dim + j] != m[j * dim + i] {
                        return Err(Error::InvalidParameter {
                            name: "covariance",
                            reason: "must be symmetric",
                        });
                    }
                }
            }
            let chol =
                linalg::cholesky(m, dim).ok_or(Error::NotPositiveDefinite { component: index })?;
            let log_det = linalg::cholesky_log_det(&chol, dim);
            Ok(Factor::Full { chol, log_det })
        }
    }
}

impl GaussianMixture {
    /// Builds a mixture; weights are rescaled to sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Covariance>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        check_len("mixture means", weights.len(), means.len())?;
        check_len("mixture covariances", weights.len(), covariances.len())?;
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "mixture weight",
                reason: "must be finite and > 0",
            });
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::from_normalized(weights, means, covariances)
    }

    fn from_normalized(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Covariance>) -> Result<Self> {
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Empty("mixture mean"));
        }
        let log_weights = weights.iter().map(|&w| libm::log(w)).collect();
        let components = means
            .into_iter()
            .zip(covariances)
            .enumerate()
            .map(|(k, (mean, cov))| {
                check_len("mixture mean", dim, mean.len())?;
                if !linalg::all_finite(&mean) {
                    return Err(Error::InvalidParameter {
                        name: "mixture mean",
                        reason: "must be finite",
                    });
                }
                let factor = factorize(&cov, dim, k)?;
                Ok(Component { mean, cov, factor })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            weights,
            log_weights,
            components,
        })
    }

    /// Mixture whose components all share the covariance `var · I`.
    pub fn isotropic(weights: Vec<f64>, means: Vec<Vec<f64>>, var: f64) -> Result<Self> {
        let covs = vec![Covariance::Isotropic(var); means.len()];
        Self::new(weights, means, covs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.components[k].mean
    }

    pub fn covariance(&self, k: usize) -> &Covariance {
        &self.components[k].cov
    }

    /// Maps a standard normal vector `z` to a draw from component `k`:
    /// `μ_k + L_k z`.
    pub fn transform_standard(&self, k: usize, z: &[f64], out: &mut [f64]) {
        let c = &self.components[k];
        match &c.factor {
            Factor::Isotropic { var } => {
                let s = libm::sqrt(*var);
                for ((o, m), zi) in out.iter_mut().zip(&c.mean).zip(z) {
                    *o = m + s * zi;
                }
            }
            Factor::Full { chol, .. } => {
                let n = self.dim;
                for i in 0..n {
                    let lz: f64 = (0..=i).map(|j| chol[i * n + j] * z[j]).sum();
                    out[i] = c.mean[i] + lz;
                }
            }
        }
    }

    /// The mixture after the perturbation kernel: means `γ μ_k`, covariances
    /// `γ² Σ_k + ν² I`, weights unchanged.
    pub fn smooth_with(&self, kernel: KernelParams) -> Result<GaussianMixture> {
        let covs = self
            .components
            .iter()
            .map(|c| smoothed_covariance(&c.cov, self.dim, kernel))
            .collect();
        let means = self
            .components
            .iter()
            .map(|c| c.mean.iter().map(|m| kernel.gamma * m).collect())
            .collect();
        GaussianMixture::from_normalized(self.weights.clone(), means, covs)
    }

    /// `smooth_with(schedule.kernel_params(t))`, for `t ∈ [0, t_max]`.
    pub fn smooth(&self, schedule: &DiffusionSchedule, t: f64) -> Result<GaussianMixture> {
        self.smooth_with(schedule.kernel_params(t)?)
    }

    /// `log Σ_k w_k N(x; μ_k, Σ_k)`, evaluated with a log-sum-exp shift.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_len("mixture argument", self.dim, x.len())?;
        Ok(self.eval_smoothed(x, KernelParams::IDENTITY, None))
    }

    /// `∇ₓ log p(x) = Σ_k r_k(x) Σ_k⁻¹ (μ_k − x)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("mixture argument", self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.eval_smoothed(x, KernelParams::IDENTITY, Some(&mut out));
        Ok(out)
    }

    /// Log-density of the smoothed mixture at `x`, optionally writing its
    /// score into `grad`. Computed without materialising the smoothed
    /// mixture; the arithmetic matches [`smooth_with`] followed by
    /// [`log_density`] operation for operation.
    ///
    /// [`smooth_with`]: GaussianMixture::smooth_with
    /// [`log_density`]: GaussianMixture::log_density
    pub(crate) fn eval_smoothed(&self, x: &[f64], kernel: KernelParams, mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.dim;
        let identity = kernel == KernelParams::IDENTITY;
        // Online log-sum-exp: `sum` and `grad` are kept relative to the
        // largest log term seen so far and rescaled when it grows.
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut resid = Vec::new();
        let mut iso_cache = (f64::NAN, 0.0);

        for (c, lw) in self.components.iter().zip(&self.log_weights) {
            let log_term = match (&c.factor, &c.cov) {
                (Factor::Isotropic { var }, _) => {
                    let var_t = kernel.gamma * kernel.gamma * var + kernel.nu_sq;
                    if iso_cache.0 != var_t {
                        iso_cache = (var_t, 0.5 * n as f64 * (LN_2PI + libm::log(var_t)));
                    }
                    let dist_sq: f64 = x
                        .iter()
                        .zip(&c.mean)
                        .map(|(xi, mi)| {
                            let d = xi - kernel.gamma * mi;
                            d * d
                        })
                        .sum();
                    lw - 0.5 * dist_sq / var_t - iso_cache.1
                }
                (Factor::Full { chol, log_det }, cov) => {
                    let owned;
                    let (l, ld) = if identity {
                        (chol.as_slice(), *log_det)
                    } else {
                        let Covariance::Full(m) = smoothed_covariance(cov, n, kernel) else {
                            unreachable!("full covariance stays full under smoothing")
                        };
                        owned = linalg::cholesky(&m, n);
                        match &owned {
                            Some(l) => (l.as_slice(), linalg::cholesky_log_det(l, n)),
                            // γ²Σ + ν²I with Σ SPD cannot lose definiteness;
                            // only reachable through overflow.
                            None => return poison(grad),
                        }
                    };
                    resid.clear();
                    resid.extend(x.iter().zip(&c.mean).map(|(xi, mi)| xi - kernel.gamma * mi));
                    linalg::forward_substitute(l, n, &mut resid);
                    let maha = linalg::norm_sq(&resid);
                    if grad.is_some() {
                        // Σ⁻¹ (x − μ) = L⁻ᵀ (L⁻¹ (x − μ))
                        linalg::backward_substitute_transposed(l, n, &mut resid);
                    }
                    lw - 0.5 * maha - 0.5 * (n as f64 * LN_2PI + ld)
                }
            };
            if log_term.is_nan() {
                return poison(grad);
            }
            if log_term == f64::NEG_INFINITY {
                continue;
            }
            if log_term > max {
                let rescale = libm::exp(max - log_term);
                sum *= rescale;
                if let Some(g) = grad.as_deref_mut() {
                    linalg::scale(rescale, g);
                }
                max = log_term;
            }
            let w = libm::exp(log_term - max);
            sum += w;
            if let Some(g) = grad.as_deref_mut() {
                match &c.factor {
                    Factor::Isotropic { var } => {
                        let s = w / (kernel.gamma * kernel.gamma * var + kernel.nu_sq);
                        for ((gi, xi), mi) in g.iter_mut().zip(x).zip(&c.mean) {
                            *gi += s * (kernel.gamma * mi - xi);
                        }
                    }
                    Factor::Full { .. } => linalg::axpy(-w, &resid, g),
                }
            }
        }

        if max == f64::NEG_INFINITY {
            if let Some(g) = grad {
                g.fill(f64::NAN);
            }
            return max;
        }
        if let Some(g) = grad {
            linalg::scale(1.0 / sum, g);
        }
        max + libm::log(sum)
    }
}

fn poison(grad: Option<&mut [f64]>) -> f64 {
    if let Some(g) = grad {
        g.fill(f64::NAN);
    }
    f64::NAN
}

fn smoothed_covariance(cov: &Covariance, n: usize, kernel: KernelParams) -> Covariance {
    let g2 = kernel.gamma * kernel.gamma;
    match cov {
        Covariance::Isotropic(v) => Covariance::Isotropic(g2 * v + kernel.nu_sq),
        Covariance::Full(m) => {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let diag = if i == j { kernel.nu_sq } else { 0.0 };
                    out.push(g2 * m[i * n + j] + diag);
                }
            }
            Covariance::Full(out)
        }
    }
}

/// Equal-weight mixture centred on `points` with covariance `bandwidth² I`.
pub fn empirical_prior(points: &[Vec<f64>], bandwidth: f64) -> Result<GaussianMixture> {
    if points.is_empty() {
        return Err(Error::Empty("empirical prior points"));
    }
    require_positive("bandwidth", bandwidth)?;
    let w = 1.0 / points.len() as f64;
    GaussianMixture::isotropic(vec![w; points.len()], points.to_vec(), bandwidth * bandwidth)
}

/// Time-dependent negative log-prior `R(x, t)` and its score.
///
/// Only energy differences at equal `t` carry meaning: a realization may
/// report `−log p_t(x) + c(t)` for any `c`.
pub trait SmoothedPrior {
    fn dim(&self) -> usize;

    /// `R(x, t)` up to an additive function of `t`.
    fn energy(&self, x: &[f64], t: f64) -> Result<f64>;

    /// Writes `∇ₓ log p_t(x) = −∇ₓ R(x, t)` into `out`.
    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    /// `R(x, t)` and the score together; realizations may share work.
    fn energy_and_score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<f64> {
        self.score_into(x, t, out)?;
        self.energy(x, t)
    }

    fn score(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, t, &mut out)?;
        Ok(out)
    }
}

impl<T: SmoothedPrior + ?Sized> SmoothedPrior for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy(&self, x: &[f64], t: f64) -> Result<f64> {
        (**self).energy(x, t)
    }
    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, t, out)
    }
    fn energy_and_score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<f64> {
        (**self).energy_and_score_into(x, t, out)
    }
}

impl<T: SmoothedPrior + ?Sized> SmoothedPrior for alloc::boxed::Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy(&self, x: &[f64], t: f64) -> Result<f64> {
        (**self).energy(x, t)
    }
    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, t, out)
    }
    fn energy_and_score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<f64> {
        (**self).energy_and_score_into(x, t, out)
    }
}

/// A mixture prior diffused along a schedule: the exact `p_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusedMixture {
    mixture: GaussianMixture,
    schedule: DiffusionSchedule,
}

impl DiffusedMixture {
    pub fn new(mixture: GaussianMixture, schedule: DiffusionSchedule) -> Self {
        Self { mixture, schedule }
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    fn kernel(&self, x: &[f64], t: f64) -> Result<KernelParams> {
        check_len("prior argument", self.mixture.dim, x.len())?;
        self.schedule.check_active(t)?;
        self.schedule.kernel_params(t)
    }
}

impl SmoothedPrior for DiffusedMixture {
    fn dim(&self) -> usize {
        self.mixture.dim
    }

    fn energy(&self, x: &[f64], t: f64) -> Result<f64> {
        let kernel = self.kernel(x, t)?;
        Ok(-self.mixture.eval_smoothed(x, kernel, None))
    }

    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let kernel = self.kernel(x, t)?;
        check_len("score buffer", self.mixture.dim, out.len())?;
        self.mixture.eval_smoothed(x, kernel, Some(out));
        Ok(())
    }

    fn energy_and_score_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<f64> {
        let kernel = self.kernel(x, t)?;
        check_len("score buffer", self.mixture.dim, out.len())?;
        Ok(-self.mixture.eval_smoothed(x, kernel, Some(out)))
    }
}
