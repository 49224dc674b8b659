//! Discrete Lyapunov equation `X = A X A^T + Q`.

use super::dense::{check_square, check_symmetric, eye, spectral_radius, symmetrize, Mat};
use crate::config::Tolerances;
use crate::error::{Error, Result};

/// Solution of a discrete Lyapunov equation with its achieved residual
/// `|X - A X A^T - Q|_F`.
#[derive(Debug, Clone)]
pub struct LyapSolution {
    pub x: Mat,
    pub residual: f64,
}

/// Stationary covariance `X = sum_k A^k Q (A^T)^k`.
pub fn solve_dlyap(a: &Mat, q: &Mat) -> Result<Mat> {
    solve_dlyap_with(a, q, &Tolerances::default()).map(|s| s.x)
}

pub fn solve_dlyap_with(a: &Mat, q: &Mat, tol: &Tolerances) -> Result<LyapSolution> {
    let n = check_square(a, "A")?;
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "dlyap: Q must be {n}x{n}, got {:?}",
            q.shape()
        )));
    }
    check_symmetric(q, "Q", tol.symmetry)?;
    if n == 0 {
        return Ok(LyapSolution { x: q.clone(), residual: 0.0 });
    }
    let rho = spectral_radius(a);
    if !(rho < 1.0 - tol.stability_margin) {
        return Err(Error::Unstable(rho));
    }
    let x = if n <= tol.dlyap_kron_max_order {
        kronecker_solve(a, q)?
    } else {
        squared_doubling(a, q, tol)?
    };
    let residual = lyap_residual(a, q, &x);
    Ok(LyapSolution { x, residual })
}

pub fn lyap_residual(a: &Mat, q: &Mat, x: &Mat) -> f64 {
    (x - a * x * a.transpose() - q).norm()
}

/// `(I - A (x) A) vec X = vec Q`, followed by one step of iterative refinement.
fn kronecker_solve(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let op = eye(n * n) - a.kronecker(a);
    let lu = op.lu();
    let solve = |rhs: &Mat| -> Result<Mat> {
        let v = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let sol = lu.solve(&v).ok_or(Error::Singular("dlyap Kronecker system"))?;
        Ok(Mat::from_column_slice(n, n, sol.as_slice()))
    };
    let mut x = symmetrize(&solve(q)?);
    let r = q - (&x - a * &x * a.transpose());
    x += symmetrize(&solve(&r)?);
    Ok(symmetrize(&x))
}

/// `X <- X + A_k X A_k^T`, `A_k <- A_k^2` until the increment vanishes.
fn squared_doubling(a: &Mat, q: &Mat, tol: &Tolerances) -> Result<Mat> {
    let mut ak = a.clone();
    let mut x = q.clone();
    for _ in 0..tol.dlyap_max_iterations {
        let inc = &ak * &x * ak.transpose();
        x += &inc;
        if inc.norm() <= f64::EPSILON * x.norm() {
            return Ok(symmetrize(&x));
        }
        ak = &ak * &ak;
    }
    Err(Error::NoConvergence { what: "dlyap doubling", iterations: tol.dlyap_max_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matsolve::dense::{mat, scalar, zeros};

    #[test]
    fn zero_dynamics_return_q() {
        let q = mat(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let x = solve_dlyap(&zeros(2, 2), &q).unwrap();
        assert!((&x - &q).amax() < 1e-15);
    }

    #[test]
    fn scalar_geometric_series() {
        let x = solve_dlyap(&scalar(0.5), &scalar(1.0)).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn unstable_is_rejected() {
        match solve_dlyap(&scalar(1.0), &scalar(1.0)) {
            Err(Error::Unstable(rho)) => assert!((rho - 1.0).abs() < 1e-12),
            other => panic!("expected Unstable, got {other:?}"),
        }
    }

    #[test]
    fn doubling_matches_kronecker() {
        let a = mat(&[&[0.9, 0.3, 0.0], &[-0.2, 0.5, 0.1], &[0.0, 0.4, -0.6]]);
        let q = mat(&[&[1.0, 0.2, 0.0], &[0.2, 2.0, 0.1], &[0.0, 0.1, 0.5]]);
        let tol = Tolerances { dlyap_kron_max_order: 0, ..Tolerances::default() };
        let doubled = solve_dlyap_with(&a, &q, &tol).unwrap();
        let kron = solve_dlyap_with(&a, &q, &Tolerances::default()).unwrap();
        assert!((&doubled.x - &kron.x).amax() < 1e-12 * kron.x.amax());
        assert!(doubled.residual < 1e-11 * (1.0 + doubled.x.norm()));
    }
}
