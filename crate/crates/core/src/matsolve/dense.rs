//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Row-major construction, `rows` nested slices of equal length.
pub fn mat(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn scalar(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

/// Assemble a block matrix. `None` entries are zero blocks whose size is
/// inferred from the other blocks in the same block row and column.
pub fn block(blocks: &[&[Option<&Mat>]]) -> Mat {
    let nbr = blocks.len();
    let nbc = blocks.first().map_or(0, |r| r.len());
    let mut heights = vec![None; nbr];
    let mut widths = vec![None; nbc];
    for (i, row) in blocks.iter().enumerate() {
        assert_eq!(row.len(), nbc, "ragged block matrix");
        for (j, b) in row.iter().enumerate() {
            if let Some(b) = b {
                if let Some(h) = heights[i] {
                    assert_eq!(h, b.nrows(), "block row {i} height mismatch");
                }
                if let Some(w) = widths[j] {
                    assert_eq!(w, b.ncols(), "block column {j} width mismatch");
                }
                heights[i] = Some(b.nrows());
                widths[j] = Some(b.ncols());
            }
        }
    }
    let heights: Vec<usize> = heights.into_iter().map(|h| h.unwrap_or(0)).collect();
    let widths: Vec<usize> = widths.into_iter().map(|w| w.unwrap_or(0)).collect();
    let mut out = zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            if let Some(b) = b {
                out.view_mut((r0, c0), (heights[i], widths[j])).copy_from(*b);
            }
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    out
}

pub fn blkdiag(a: &Mat, b: &Mat) -> Mat {
    block(&[&[Some(a), None], &[None, Some(b)]])
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// `X + X^T`
pub fn sym(x: &Mat) -> Mat {
    x + x.transpose()
}

pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

pub fn is_symmetric(x: &Mat, rel: f64) -> bool {
    x.is_square() && (x - x.transpose()).amax() <= rel * (1.0 + x.amax())
}

pub fn check_symmetric(x: &Mat, name: &'static str, rel: f64) -> Result<()> {
    if !is_symmetric(x, rel) {
        return Err(Error::NotSymmetric(name));
    }
    Ok(())
}

pub fn check_finite(x: &Mat, name: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub fn check_square(x: &Mat, name: &str) -> Result<usize> {
    if !x.is_square() {
        return Err(Error::Dimension(format!("{name} must be square, got {:?}", x.shape())));
    }
    Ok(x.nrows())
}

pub fn check_shape(x: &Mat, rows: usize, cols: usize, name: &str) -> Result<()> {
    if x.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{name} must be {rows}x{cols}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(a: &Mat) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

pub fn op_norm_c(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Symmetric square root of a PSD matrix; small negative eigenvalues are clamped.
pub fn psd_sqrt(a: &Mat) -> Mat {
    if a.nrows() == 0 {
        return a.clone();
    }
    let eig = symmetrize(a).symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Symmetric inverse square root of a positive definite matrix.
pub fn pd_inv_sqrt(a: &Mat, name: &'static str) -> Result<Mat> {
    let eig = symmetrize(a).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite(name));
    }
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose())
}

pub fn min_eigenvalue(a: &Mat) -> f64 {
    symmetrize(a).symmetric_eigen().eigenvalues.min()
}

pub fn max_eigenvalue(a: &Mat) -> f64 {
    symmetrize(a).symmetric_eigen().eigenvalues.max()
}

pub fn inverse(a: &Mat, what: &'static str) -> Result<Mat> {
    a.clone().try_inverse().ok_or(Error::Singular(what))
}

/// Solve `a x = b`.
pub fn solve(a: &Mat, b: &Mat, what: &'static str) -> Result<Mat> {
    a.clone().lu().solve(b).ok_or(Error::Singular(what))
}

pub fn to_complex(a: &Mat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Relative matrix difference in Frobenius norm.
pub fn rel_diff_mat(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

pub fn to_rows(a: &Mat) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse(format!("matrix `{name}` has ragged rows")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}
