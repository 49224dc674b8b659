//! Stabilizability and detectability.
//!
//! The rank of `[A - lambda I, B]` at an unstable eigenvalue is decided on the
//! Kalman decomposition: the uncontrollable block `W^T A W` (with `W` spanning
//! the orthogonal complement of the controllable subspace) must be Schur
//! stable. This is the PBH criterion, evaluated without relying on the
//! accuracy of individual (possibly defective) eigenvalues.

use super::dense::{op_norm, spectral_radius, zeros, Mat};
use crate::config::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PbhReport {
    pub stabilizable: bool,
    pub detectable: bool,
}

pub fn pbh_tests(a: &Mat, b: &Mat, c: &Mat) -> PbhReport {
    let tol = Tolerances::default();
    PbhReport {
        stabilizable: is_stabilizable(a, b, tol.pbh_rank),
        detectable: is_detectable(a, c, tol.pbh_rank),
    }
}

pub fn is_stabilizable(a: &Mat, b: &Mat, rel_tol: f64) -> bool {
    let n = a.nrows();
    let v = controllable_basis(a, b, rel_tol);
    if v.ncols() == n {
        return true;
    }
    let w = orthogonal_complement(&v, n);
    let a_uu = w.transpose() * a * &w;
    spectral_radius(&a_uu) < 1.0
}

pub fn is_detectable(a: &Mat, c: &Mat, rel_tol: f64) -> bool {
    is_stabilizable(&a.transpose(), &c.transpose(), rel_tol)
}

/// Orthonormal basis of `range [B, AB, A^2 B, ...]`.
pub fn controllable_basis(a: &Mat, b: &Mat, rel_tol: f64) -> Mat {
    let n = a.nrows();
    let scale_b = op_norm(b);
    if n == 0 || scale_b == 0.0 {
        return zeros(n, 0);
    }
    let scale_a = op_norm(a).max(f64::MIN_POSITIVE);
    let mut basis = orth(b, rel_tol * scale_b);
    let mut newest = basis.clone();
    while basis.ncols() < n && newest.ncols() > 0 {
        let mut z = a * &newest;
        for _ in 0..2 {
            z -= &basis * (basis.transpose() * &z);
        }
        newest = orth(&z, rel_tol * scale_a);
        if newest.ncols() > 0 {
            basis = super::dense::hstack(&basis, &newest);
        }
    }
    basis
}

/// Left singular vectors of `z` whose singular values exceed `threshold`.
pub fn orth(z: &Mat, threshold: f64) -> Mat {
    if z.ncols() == 0 || z.nrows() == 0 {
        return zeros(z.nrows(), 0);
    }
    let svd = z.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > threshold).collect();
    Mat::from_fn(z.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Orthonormal basis of the complement of `range(v)` (v orthonormal, n rows).
pub fn orthogonal_complement(v: &Mat, n: usize) -> Mat {
    let proj = Mat::identity(n, n) - v * v.transpose();
    orth(&proj, 0.5)
}
