//! Diffusion-time parametrisation of the perturbation kernel
//! `p_{t|0}(x_t | x_0) = N(x_t; γ_t x_0, ν_t² I)`, regularisation weights
//! `α_t`, and the decreasing time grids the optimizers walk along.

use alloc::vec::Vec;

use crate::linalg::require_positive;
use crate::{Error, Result};

/// The forward noising process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseProcess {
    /// Variance exploding: `dx = σᵗ dw`, so `γ_t = 1` and
    /// `ν_t² = (σ^{2t} − 1) / (2 ln σ)`.
    VarianceExploding { sigma: f64 },
    /// Variance preserving with linear `β(s) = β_min + s (β_max − β_min)`:
    /// `γ_t = exp(−½∫₀ᵗβ)`, `ν_t² = 1 − γ_t²`.
    VariancePreserving { beta_min: f64, beta_max: f64 },
}

/// Mean scaling and variance of the perturbation kernel at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub gamma: f64,
    pub nu_sq: f64,
}

impl KernelParams {
    /// The kernel at `t = 0`: no scaling, no noise.
    pub const IDENTITY: KernelParams = KernelParams {
        gamma: 1.0,
        nu_sq: 0.0,
    };

    pub fn nu(&self) -> f64 {
        libm::sqrt(self.nu_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSchedule {
    process: NoiseProcess,
    t_min: f64,
    t_max: f64,
}

impl DiffusionSchedule {
    pub fn new(process: NoiseProcess, t_min: f64, t_max: f64) -> Result<Self> {
        match process {
            NoiseProcess::VarianceExploding { sigma } => {
                if !(sigma > 1.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "sigma",
                        reason: "must be finite and > 1",
                    });
                }
            }
            NoiseProcess::VariancePreserving { beta_min, beta_max } => {
                require_positive("beta_min", beta_min)?;
                require_positive("beta_max", beta_max)?;
            }
        }
        require_positive("t_min", t_min)?;
        if !(t_max > t_min && t_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: "must be finite and > t_min",
            });
        }
        Ok(Self {
            process,
            t_min,
            t_max,
        })
    }

    pub fn variance_exploding(sigma: f64, t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(NoiseProcess::VarianceExploding { sigma }, t_min, t_max)
    }

    pub fn variance_preserving(beta_min: f64, beta_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(
            NoiseProcess::VariancePreserving { beta_min, beta_max },
            t_min,
            t_max,
        )
    }

    pub fn process(&self) -> NoiseProcess {
        self.process
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Kernel parameters for `t ∈ [0, t_max]`.
    pub fn kernel_params(&self, t: f64) -> Result<KernelParams> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(Error::TimeOutOfDomain {
                t,
                lower: 0.0,
                upper: self.t_max,
            });
        }
        Ok(match self.process {
            NoiseProcess::VarianceExploding { sigma } => {
                let ln_sigma = libm::log(sigma);
                KernelParams {
                    gamma: 1.0,
                    nu_sq: libm::expm1(2.0 * t * ln_sigma) / (2.0 * ln_sigma),
                }
            }
            NoiseProcess::VariancePreserving { beta_min, beta_max } => {
                let integral = beta_min * t + 0.5 * t * t * (beta_max - beta_min);
                KernelParams {
                    gamma: libm::exp(-0.5 * integral),
                    nu_sq: -libm::expm1(-integral),
                }
            }
        })
    }

    /// Fails unless `t ∈ [t_min, t_max]`.
    pub fn check_active(&self, t: f64) -> Result<()> {
        if (self.t_min..=self.t_max).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfDomain {
                t,
                lower: self.t_min,
                upper: self.t_max,
            })
        }
    }
}

/// How the regularisation weight depends on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRule {
    /// `α_t = α`.
    Constant,
    /// `α_t = α ν_t / γ_t`.
    NuOverGamma,
}

/// Regularisation weight `α_t` for `t ∈ [0, t_max]`.
pub fn alpha_at(base: f64, schedule: &DiffusionSchedule, t: f64, rule: AlphaRule) -> Result<f64> {
    require_positive("alpha", base)?;
    match rule {
        AlphaRule::Constant => {
            schedule.kernel_params(t)?;
            Ok(base)
        }
        AlphaRule::NuOverGamma => {
            let k = schedule.kernel_params(t)?;
            if !(k.gamma > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "gamma_t",
                    reason: "kernel mean scaling vanished",
                });
            }
            Ok(base * k.nu() / k.gamma)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpacing {
    Linear,
    Logarithmic,
}

/// Strictly decreasing times `t_max = t_1 > … > t_I = t_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    values: Vec<f64>,
    spacing: GridSpacing,
}

/// Builds a grid of `count` times from `t_max` down to `t_min`, both exact.
pub fn make_grid(t_min: f64, t_max: f64, count: usize, spacing: GridSpacing) -> Result<TimeGrid> {
    require_positive("t_min", t_min)?;
    if !(t_max > t_min && t_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_max",
            reason: "must be finite and > t_min",
        });
    }
    if count < 2 {
        return Err(Error::InvalidParameter {
            name: "grid count",
            reason: "must be at least 2",
        });
    }
    let last = (count - 1) as f64;
    let mut values: Vec<f64> = match spacing {
        GridSpacing::Linear => (0..count)
            .map(|k| t_max + (t_min - t_max) * (k as f64 / last))
            .collect(),
        GridSpacing::Logarithmic => {
            let (lo, hi) = (libm::log(t_min), libm::log(t_max));
            (0..count)
                .map(|k| libm::exp(hi + (lo - hi) * (k as f64 / last)))
                .collect()
        }
    };
    values[0] = t_max;
    values[count - 1] = t_min;
    if values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name: "grid count",
            reason: "too many points to stay strictly decreasing in f64",
        });
    }
    Ok(TimeGrid { values, spacing })
}

impl TimeGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> GridSpacing {
        self.spacing
    }

    pub fn t_max(&self) -> f64 {
        self.values[0]
    }

    pub fn t_min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of the largest grid value that is `≤ t`, if any.
    pub fn first_index_at_most(&self, t: f64) -> Option<usize> {
        let idx = self.values.partition_point(|&v| v > t);
        (idx < self.values.len()).then_some(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ve() -> DiffusionSchedule {
        DiffusionSchedule::variance_exploding(10.0, 1e-3, 10.0).unwrap()
    }

    fn vp() -> DiffusionSchedule {
        DiffusionSchedule::variance_preserving(0.1, 20.0, 1e-3, 1.0).unwrap()
    }

    #[test]
    fn ve_has_no_noise_at_zero() {
        assert_eq!(ve().kernel_params(0.0).unwrap(), KernelParams::IDENTITY);
    }

    #[test]
    fn ve_variance_at_one() {
        let k = ve().kernel_params(1.0).unwrap();
        assert_eq!(k.gamma, 1.0);
        assert!((k.nu_sq - 99.0 / (2.0 * libm::log(10.0))).abs() < 1e-12);
        assert!((k.nu_sq / 21.4977 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn vp_at_one() {
        let k = vp().kernel_params(1.0).unwrap();
        assert!((k.gamma - libm::exp(-5.025)).abs() < 1e-15);
        assert!((k.gamma / 6.56e-3 - 1.0).abs() < 2.5e-3);
        assert!((k.gamma * k.gamma + k.nu_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_rejects_out_of_domain_times() {
        assert!(matches!(
            ve().kernel_params(10.5),
            Err(Error::TimeOutOfDomain { .. })
        ));
        assert!(ve().kernel_params(-1e-9).is_err());
        assert!(ve().kernel_params(f64::NAN).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(DiffusionSchedule::variance_exploding(1.0, 1e-3, 1.0).is_err());
        assert!(DiffusionSchedule::variance_exploding(10.0, 0.0, 1.0).is_err());
        assert!(DiffusionSchedule::variance_exploding(10.0, 1.0, 1.0).is_err());
        assert!(DiffusionSchedule::variance_preserving(-0.1, 20.0, 1e-3, 1.0).is_err());
    }

    #[test]
    fn alpha_rules() {
        assert_eq!(alpha_at(5.0, &ve(), 3.0, AlphaRule::Constant).unwrap(), 5.0);
        assert_eq!(alpha_at(1.0, &ve(), 0.0, AlphaRule::NuOverGamma).unwrap(), 0.0);
        let a = alpha_at(1.0, &vp(), 1.0, AlphaRule::NuOverGamma).unwrap();
        assert!((a - 152.166_970_283_946).abs() < 1e-9, "{a}");
        assert!((a / 152.4 - 1.0).abs() < 2.5e-3);
        assert!(alpha_at(0.0, &vp(), 1.0, AlphaRule::Constant).is_err());
    }

    #[test]
    fn two_point_grid_is_just_the_endpoints() {
        let g = make_grid(1e-3, 10.0, 2, GridSpacing::Linear).unwrap();
        assert_eq!(g.values(), &[10.0, 1e-3]);
    }

    #[test]
    fn log_grid_is_geometric() {
        let g = make_grid(1e-3, 10.0, 5, GridSpacing::Logarithmic).unwrap();
        let expected = [10.0, 1.0, 0.1, 0.01, 0.001];
        for (v, e) in g.values().iter().zip(expected) {
            assert!((v - e).abs() <= 1e-14 * e, "{v} vs {e}");
        }
        for w in g.values().windows(2) {
            assert!((w[1] / w[0] - 0.1).abs() < 1e-13);
        }
    }

    #[test]
    fn toy_linear_grid() {
        let g = make_grid(1e-3, 10.0, 1300, GridSpacing::Linear).unwrap();
        assert_eq!(g.len(), 1300);
        assert_eq!(g.t_max(), 10.0);
        assert_eq!(g.t_min(), 1e-3);
        assert!(g.values().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn grid_validation() {
        assert!(make_grid(1e-3, 10.0, 1, GridSpacing::Linear).is_err());
        assert!(make_grid(0.0, 10.0, 4, GridSpacing::Linear).is_err());
        assert!(make_grid(2.0, 1.0, 4, GridSpacing::Logarithmic).is_err());
    }

    #[test]
    fn first_index_at_most_lookup() {
        let g = make_grid(1.0, 4.0, 4, GridSpacing::Linear).unwrap();
        assert_eq!(g.first_index_at_most(4.0), Some(0));
        assert_eq!(g.first_index_at_most(3.5), Some(1));
        assert_eq!(g.first_index_at_most(1.0), Some(3));
        assert_eq!(g.first_index_at_most(0.5), None);
    }
}
