//! Linear forward operators with exact adjoints.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::check_len;
use crate::linalg;
use crate::{Error, Result};

/// A linear map `A: Rⁿ → Rᵐ` together with its adjoint.
///
/// Implementors provide the unchecked kernels; the checked [`apply`] and
/// [`adjoint`] wrappers validate lengths first.
///
/// [`apply`]: LinearOperator::apply
/// [`adjoint`]: LinearOperator::adjoint
pub trait LinearOperator {
    /// `n`, the length of the vectors `A` acts on.
    fn input_dim(&self) -> usize;
    /// `m`, the length of the vectors `A` produces.
    fn output_dim(&self) -> usize;

    /// Writes `A x` into `out`. Lengths are assumed to be correct.
    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]);

    /// Writes `A* y` into `out`. Lengths are assumed to be correct.
    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]);

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("operator input", self.input_dim(), x.len())?;
        check_len("operator output buffer", self.output_dim(), out.len())?;
        self.apply_unchecked(x, out);
        Ok(())
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("adjoint input", self.output_dim(), y.len())?;
        check_len("adjoint output buffer", self.input_dim(), out.len())?;
        self.adjoint_unchecked(y, out);
        Ok(())
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.input_dim()];
        self.adjoint_into(y, &mut out)?;
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_unchecked(x, out)
    }
    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_unchecked(y, out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for alloc::boxed::Box<T> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_unchecked(x, out)
    }
    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_unchecked(y, out)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter {
                name: "matrix shape",
                reason: "rows and columns must be positive",
            });
        }
        check_len("matrix entries", rows * cols, data.len())?;
        if !linalg::all_finite(&data) {
            return Err(Error::InvalidParameter {
                name: "matrix entries",
                reason: "must be finite",
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("matrix rows"))?;
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

impl LinearOperator for DenseOperator {
    fn input_dim(&self) -> usize {
        self.cols
    }

    fn output_dim(&self) -> usize {
        self.rows
    }

    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = linalg::dot(row, x);
        }
    }

    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            linalg::axpy(*yi, row, out);
        }
    }
}

/// Compressed sparse rows; the adjoint is the literal transpose product.
#[derive(Debug, Clone, PartialEq)]
struct CsrMatrix {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            *o = self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    fn mul_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for (&c, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                out[c] += v * yr;
            }
        }
    }
}

/// Discrete parallel-beam Radon transform of an `n_px × n_px` image.
///
/// Pixels and detector bins have unit spacing and are centred on the
/// rotation axis. Each ray is traced with Joseph's method: one sample per
/// image row (or column, whichever the ray crosses more steeply), linearly
/// interpolated between the two nearest pixels and weighted by the path
/// length per step. The weights are stored as a sparse matrix so the adjoint
/// is its exact transpose.
///
/// Images are row-major with row 0 at the top. The sinogram is angle-major:
/// entry `a * n_detectors + d` holds angle `a`, detector `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonOperator {
    n_px: usize,
    angles: Vec<f64>,
    n_detectors: usize,
    weights: CsrMatrix,
}

/// Builds a parallel-beam transform with `n_angles` angles evenly spaced
/// over `[0, π)` and `⌈n_px·√2⌉` detector bins.
pub fn build_radon(n_px: usize, n_angles: usize) -> Result<RadonOperator> {
    if n_angles == 0 {
        return Err(Error::InvalidParameter {
            name: "n_angles",
            reason: "must be at least 1",
        });
    }
    let angles = (0..n_angles)
        .map(|a| PI * a as f64 / n_angles as f64)
        .collect();
    RadonOperator::with_angles(n_px, angles)
}

impl RadonOperator {
    pub fn with_angles(n_px: usize, angles: Vec<f64>) -> Result<Self> {
        if n_px < 2 {
            return Err(Error::InvalidParameter {
                name: "n_px",
                reason: "must be at least 2",
            });
        }
        if angles.is_empty() {
            return Err(Error::Empty("angle list"));
        }
        if !linalg::all_finite(&angles) {
            return Err(Error::InvalidParameter {
                name: "angles",
                reason: "must be finite",
            });
        }
        let n_detectors = libm::ceil(n_px as f64 * core::f64::consts::SQRT_2) as usize;
        let weights = joseph_weights(n_px, &angles, n_detectors);
        Ok(Self {
            n_px,
            angles,
            n_detectors,
            weights,
        })
    }

    pub fn n_px(&self) -> usize {
        self.n_px
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    /// Signed distance of detector `d` from the rotation axis.
    pub fn detector_offset(&self, d: usize) -> f64 {
        d as f64 - (self.n_detectors as f64 - 1.0) / 2.0
    }

    /// Number of stored ray-pixel weights.
    pub fn nnz(&self) -> usize {
        self.weights.values.len()
    }
}

fn joseph_weights(n: usize, angles: &[f64], n_det: usize) -> CsrMatrix {
    let centre = (n as f64 - 1.0) / 2.0;
    let det_centre = (n_det as f64 - 1.0) / 2.0;
    let mut row_ptr = Vec::with_capacity(angles.len() * n_det + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);

    let push = |row: isize, col: isize, w: f64, col_idx: &mut Vec<usize>, values: &mut Vec<f64>| {
        if w != 0.0 && (0..n as isize).contains(&row) && (0..n as isize).contains(&col) {
            col_idx.push(row as usize * n + col as usize);
            values.push(w);
        }
    };

    for &theta in angles {
        let (sin, cos) = libm::sincos(theta);
        for d in 0..n_det {
            let s = d as f64 - det_centre;
            // Ray: s·(cos, sin) + u·(−sin, cos), x to the right, y up.
            if libm::fabs(cos) >= libm::fabs(sin) {
                let step = 1.0 / libm::fabs(cos);
                for r in 0..n {
                    let y = centre - r as f64;
                    let u = (y - s * sin) / cos;
                    let col = s * cos - u * sin + centre;
                    let c0 = libm::floor(col);
                    let frac = col - c0;
                    let c0 = c0 as isize;
                    push(r as isize, c0, (1.0 - frac) * step, &mut col_idx, &mut values);
                    push(r as isize, c0 + 1, frac * step, &mut col_idx, &mut values);
                }
            } else {
                let step = 1.0 / libm::fabs(sin);
                for c in 0..n {
                    let x = c as f64 - centre;
                    let u = (s * cos - x) / sin;
                    let row = centre - (s * sin + u * cos);
                    let r0 = libm::floor(row);
                    let frac = row - r0;
                    let r0 = r0 as isize;
                    push(r0, c as isize, (1.0 - frac) * step, &mut col_idx, &mut values);
                    push(r0 + 1, c as isize, frac * step, &mut col_idx, &mut values);
                }
            }
            row_ptr.push(values.len());
        }
    }
    CsrMatrix {
        cols: n * n,
        row_ptr,
        col_idx,
        values,
    }
}

impl LinearOperator for RadonOperator {
    fn input_dim(&self) -> usize {
        self.weights.cols
    }

    fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn apply_unchecked(&self, x: &[f64], out: &mut [f64]) {
        self.weights.mul(x, out);
    }

    fn adjoint_unchecked(&self, y: &[f64], out: &mut [f64]) {
        self.weights.mul_transpose(y, out);
    }
}

/// Estimates `‖A‖₂` with `iters` rounds of power iteration on `A*A`.
pub fn estimate_norm<O: LinearOperator + ?Sized>(op: &O, iters: usize) -> f64 {
    let n = op.input_dim();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut ax = vec![0.0; op.output_dim()];
    let mut sigma_sq = 0.0;
    for _ in 0..iters.max(1) {
        let nx = linalg::norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        linalg::scale(1.0 / nx, &mut x);
        op.apply_unchecked(&x, &mut ax);
        op.adjoint_unchecked(&ax, &mut x);
        sigma_sq = linalg::norm(&x);
    }
    libm::sqrt(sigma_sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DenseOperator {
        DenseOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap()
    }

    #[test]
    fn toy_operator_maps_ones_to_clean_measurement() {
        assert_eq!(toy().apply(&[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn toy_adjoint_is_transpose() {
        assert_eq!(toy().adjoint(&[2.0, 0.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn identity_is_a_no_op() {
        let id = DenseOperator::identity(3);
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(id.adjoint(&[4.0, 5.0, 6.0]).unwrap(), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn dimension_errors_name_both_sizes() {
        let err = toy().apply(&[1.0, 2.0, 3.0]).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                what: "operator input",
                expected: 2,
                actual: 3
            }
        );
        assert!(toy().adjoint(&[1.0]).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(DenseOperator::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(DenseOperator::from_rows(&[]).is_err());
    }

    #[test]
    fn radon_shape_bookkeeping() {
        let op = build_radon(16, 12).unwrap();
        assert_eq!(op.n_detectors(), 23);
        assert!(op.n_detectors() as f64 >= 16.0 * core::f64::consts::SQRT_2);
        assert_eq!(op.output_dim(), 12 * 23);
        assert_eq!(op.input_dim(), 256);
        assert_eq!(op.angles()[0], 0.0);
        assert!((op.angles()[11] - PI * 11.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn radon_rejects_degenerate_sizes() {
        assert!(build_radon(1, 4).is_err());
        assert!(build_radon(8, 0).is_err());
    }

    #[test]
    fn radon_of_zero_is_zero() {
        let op = build_radon(8, 5).unwrap();
        let sino = op.apply(&[0.0; 64]).unwrap();
        assert!(sino.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_rays_through_ones_measure_side_length() {
        // At angle 0 every ray inside the support crosses all n rows with
        // interpolation weights summing to one per row.
        let n = 16;
        let op = build_radon(n, 3).unwrap();
        let sino = op.apply(&vec![1.0; n * n]).unwrap();
        let half = (n as f64 - 1.0) / 2.0;
        for d in 0..op.n_detectors() {
            let s = op.detector_offset(d);
            let v = sino[d];
            if s.abs() <= half {
                assert!((v - n as f64).abs() < 1e-12, "s={s} v={v}");
            } else if s.abs() > n as f64 / 2.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn norm_estimate_of_toy_is_sqrt_two() {
        assert!((estimate_norm(&toy(), 50) - core::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
