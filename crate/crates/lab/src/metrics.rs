//! Reconstruction quality metrics.

use crate::error::{LabError, LabResult};
use crate::image::Image;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_pair(x: &Image, reference: &Image, data_range: f64) -> LabResult<()> {
    if !x.same_shape(reference) {
        return Err(LabError::config(format!(
            "image shapes differ: {}x{} vs {}x{}",
            x.width(),
            x.height(),
            reference.width(),
            reference.height()
        )));
    }
    if !(data_range > 0.0) {
        return Err(LabError::config("data range must be > 0"));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; identical images give `+inf`.
pub fn psnr(x: &Image, reference: &Image, data_range: f64) -> LabResult<f64> {
    check_pair(x, reference, data_range)?;
    let n = x.data().len() as f64;
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut taps = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, w) in taps.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *w = (-0.5 * d * d / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|w| *w /= sum);
    taps
}

/// Separable Gaussian filter over the windows that fit inside the image.
fn filter_valid(data: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (width + 1 - k, height + 1 - k);
    let mut rows = vec![0.0; ow * height];
    for r in 0..height {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|i| taps[i] * data[r * width + c + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|i| taps[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over all 11×11 Gaussian-weighted windows
/// (σ = 1.5, K₁ = 0.01, K₂ = 0.03) lying fully inside the image.
pub fn ssim(x: &Image, reference: &Image, data_range: f64) -> LabResult<f64> {
    check_pair(x, reference, data_range)?;
    let k = 2 * SSIM_RADIUS + 1;
    if x.width() < k || x.height() < k {
        return Err(LabError::config(format!("SSIM needs images of at least {k}x{k} pixels")));
    }
    let (w, h) = (x.width(), x.height());
    let taps = gaussian_taps();
    let a = x.data();
    let b = reference.data();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| f(*p, *q)).collect() };
    let mu_a = filter_valid(a, w, h, &taps);
    let mu_b = filter_valid(b, w, h, &taps);
    let aa = filter_valid(&prod(&|p, _| p * p), w, h, &taps);
    let bb = filter_valid(&prod(&|_, q| q * q), w, h, &taps);
    let ab = filter_valid(&prod(&|p, q| p * q), w, h, &taps);
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Image {
        Image::new(n, n, (0..n * n).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap()
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = ramp(4);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_constant_offset() {
        let a = ramp(4);
        let b = Image::new(4, 4, a.data().iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((psnr(&b, &a, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn metric_errors() {
        let a = ramp(12);
        let b = ramp(11);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(ssim(&ramp(10), &ramp(10), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let a = ramp(16);
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let inv = Image::new(16, 16, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&inv, &a, 1.0).unwrap() < 1.0);
    }

    #[test]
    fn taps_are_normalised() {
        let t = gaussian_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
    }
}
