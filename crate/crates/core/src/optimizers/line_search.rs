//! Armijo backtracking and the Barzilai–Borwein step candidate.

use crate::linalg;
use crate::{Error, Result};

/// Constants of the sufficient-decrease test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoRule {
    /// Sufficient-decrease constant `c ∈ (0, 1)`.
    pub c: f64,
    /// Backtracking factor `β ∈ (0, 1)`.
    pub beta: f64,
    pub max_backtracks: usize,
    /// Step taken when no trial step is accepted.
    pub lambda_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub lambda: f64,
    /// Objective value at the returned step.
    pub value: f64,
    pub backtracks: usize,
    /// No trial step passed; `lambda` is the floor.
    pub exhausted: bool,
}

/// Largest `λ ∈ {λ₀ βˡ : ℓ = 0, …, max_backtracks}` with
/// `φ(λ) ≤ f₀ + c λ slope`, where `φ(λ) = f(x + λd)` and `slope = ⟨∇f(x), d⟩`.
///
/// Non-finite trial values count as rejections. If every trial fails the
/// floor step is returned with `exhausted` set.
pub fn armijo_backtrack<F>(mut phi: F, f0: f64, slope: f64, rule: &ArmijoRule, lambda0: f64) -> Result<LineSearch>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(slope < 0.0) {
        return Err(Error::Precondition("Armijo search needs a descent slope < 0"));
    }
    if !(rule.c > 0.0 && rule.c < 1.0) || !(rule.beta > 0.0 && rule.beta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "Armijo constants",
            reason: "c and beta must lie in (0, 1)",
        });
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "initial step",
            reason: "must be finite and > 0",
        });
    }
    let mut lambda = lambda0;
    for backtracks in 0..=rule.max_backtracks {
        let value = phi(lambda)?;
        if value.is_finite() && value <= f0 + rule.c * lambda * slope {
            return Ok(LineSearch {
                lambda,
                value,
                backtracks,
                exhausted: false,
            });
        }
        lambda *= rule.beta;
    }
    let value = phi(rule.lambda_floor)?;
    Ok(LineSearch {
        lambda: rule.lambda_floor,
        value,
        backtracks: rule.max_backtracks,
        exhausted: true,
    })
}

/// Barzilai–Borwein step `⟨s, s⟩ / ⟨s, z⟩` for `s = x_i − x_{i−1}`,
/// `z = ∇f(x_i) − ∇f(x_{i−1})`, clamped to `[floor, ceil]`.
/// Non-positive curvature `⟨s, z⟩ ≤ 0` yields `ceil`.
pub fn bb_candidate(s: &[f64], z: &[f64], floor: f64, ceil: f64) -> f64 {
    let sz = linalg::dot(s, z);
    if !(sz > 0.0) {
        return ceil;
    }
    let step = linalg::norm_sq(s) / sz;
    if step.is_nan() {
        return ceil;
    }
    step.clamp(floor, ceil)
}
