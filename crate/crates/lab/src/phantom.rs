//! Random ellipse phantoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, LabResult};
use crate::image::Image;

pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// An `n_px × n_px` image of 1 to 8 overlapping ellipses with random centre,
/// semi-axes, orientation and intensity. Overlaps add up and the result is
/// clipped to `[0, 1]`. The same seed always gives the same image.
pub fn generate_ellipse_phantom(seed: u64, n_px: usize) -> LabResult<Image> {
    if n_px < MIN_SIDE {
        return Err(LabError::config(format!("phantoms need n_px >= {MIN_SIDE}, got {n_px}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=8);
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|_| Ellipse {
            cx: rng.random_range(-0.6..0.6),
            cy: rng.random_range(-0.6..0.6),
            a: rng.random_range(0.1..0.5),
            b: rng.random_range(0.1..0.5),
            angle: rng.random_range(0.0..core::f64::consts::PI),
            intensity: rng.random_range(0.1..=1.0),
        })
        .collect();
    let mut image = Image::zeros(n_px, n_px);
    let scale = 2.0 / n_px as f64;
    for row in 0..n_px {
        let y = 1.0 - (row as f64 + 0.5) * scale;
        for col in 0..n_px {
            let x = (col as f64 + 0.5) * scale - 1.0;
            let v: f64 = ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum();
            image.data_mut()[row * n_px + col] = v.clamp(0.0, 1.0);
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_image() {
        let a = generate_ellipse_phantom(42, 32).unwrap();
        let b = generate_ellipse_phantom(42, 32).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_ellipse_phantom(43, 32).unwrap());
    }

    #[test]
    fn values_in_unit_interval() {
        for seed in 0..50 {
            let img = generate_ellipse_phantom(seed, 16).unwrap();
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn rejects_tiny_images() {
        assert!(generate_ellipse_phantom(0, 15).is_err());
    }
}
