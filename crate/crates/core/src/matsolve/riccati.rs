//! Discrete algebraic Riccati equation
//! `P = A^T P A - A^T P B (B^T P B + R)^{-1} B^T P A + Q`.
//!
//! Solved by the structure-preserving doubling algorithm, followed by Newton
//! (Hewer) refinement steps on the closed loop. Doubling converges
//! quadratically in the number of iterations even when the closed loop has
//! eigenvalues close to the unit circle.

use super::dense::{
    check_finite, check_square, check_symmetric, eye, inverse, min_eigenvalue, psd_sqrt,
    spectral_radius, symmetrize, Mat,
};
use super::lyapunov::solve_dlyap_with;
use super::pbh::{is_detectable, is_stabilizable};
use crate::config::Tolerances;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: Mat,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
    pub doubling_iterations: usize,
}

pub fn solve_dare(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    solve_dare_with(a, b, q, r, &Tolerances::default()).map(|s| s.p)
}

pub fn solve_dare_with(a: &Mat, b: &Mat, q: &Mat, r: &Mat, tol: &Tolerances) -> Result<DareSolution> {
    let n = check_square(a, "A")?;
    let m = b.ncols();
    if b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "dare: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    for (x, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        check_finite(x, name)?;
    }
    check_symmetric(q, "Q", tol.symmetry)?;
    check_symmetric(r, "R", tol.symmetry)?;
    if m > 0 && min_eigenvalue(r) <= 0.0 {
        return Err(Error::NotPositiveDefinite("R"));
    }
    if !is_stabilizable(a, b, tol.pbh_rank) {
        return Err(Error::NonStabilizable("A, B"));
    }
    if !is_detectable(a, &psd_sqrt(q), tol.pbh_rank) {
        return Err(Error::NonDetectable("A, Q^1/2"));
    }
    if n == 0 {
        return Ok(DareSolution { p: q.clone(), residual: 0.0, doubling_iterations: 0 });
    }

    let (mut p, iterations) = doubling(a, b, q, r, tol)?;
    for _ in 0..tol.dare_newton_steps {
        p = newton_step(a, b, q, r, &p, tol)?;
    }
    let residual = dare_residual(a, b, q, r, &p);
    Ok(DareSolution { p, residual, doubling_iterations: iterations })
}

/// `|P - A^T P A + A^T P B (B^T P B + R)^{-1} B^T P A - Q|_F`
pub fn dare_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> f64 {
    let at = a.transpose();
    let psi = b.transpose() * p * b + r;
    let gain = match psi.clone().lu().solve(&(b.transpose() * p * a)) {
        Some(g) => g,
        None => return f64::INFINITY,
    };
    (p - &at * p * a + &at * p * b * gain - q).norm()
}

/// Optimal gain `F = -(B^T P B + R)^{-1} B^T P A` for `u = F x`.
pub fn riccati_gain(a: &Mat, b: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    let psi = b.transpose() * p * b + r;
    Ok(-super::dense::solve(&psi, &(b.transpose() * p * a), "B^T P B + R")?)
}

fn doubling(a: &Mat, b: &Mat, q: &Mat, r: &Mat, tol: &Tolerances) -> Result<(Mat, usize)> {
    let n = a.nrows();
    let ident = eye(n);
    let mut ak = a.clone();
    let mut gk = symmetrize(&(b * inverse(r, "R")? * b.transpose()));
    let mut hk = q.clone();
    for it in 1..=tol.dare_max_iterations {
        let w = &ident + &gk * &hk;
        let lu = w.lu();
        let w_inv_a = lu.solve(&ak).ok_or(Error::Singular("I + G H in doubling"))?;
        let w_inv_g = lu.solve(&gk).ok_or(Error::Singular("I + G H in doubling"))?;
        let a_next = &ak * &w_inv_a;
        let g_next = symmetrize(&(&gk + &ak * &w_inv_g * ak.transpose()));
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w_inv_a));
        let inc = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !hk.iter().all(|v| v.is_finite()) {
            break;
        }
        if inc <= tol.dare_doubling * hk.norm().max(f64::MIN_POSITIVE) {
            return Ok((hk, it));
        }
    }
    Err(Error::NoConvergence { what: "DARE doubling", iterations: tol.dare_max_iterations })
}

fn newton_step(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat, tol: &Tolerances) -> Result<Mat> {
    let f = riccati_gain(a, b, r, p)?;
    let acl = a + b * &f;
    let rho = spectral_radius(&acl);
    if !(rho < 1.0) {
        return Err(Error::Unstable(rho));
    }
    let rhs = symmetrize(&(q + f.transpose() * r * &f));
    let refined = solve_dlyap_with(&acl.transpose(), &rhs, tol)?.x;
    // Keep the doubling iterate if refinement does not improve the residual
    // (possible when the closed loop is within a hair of the unit circle).
    if dare_residual(a, b, q, r, &refined) <= dare_residual(a, b, q, r, p) {
        Ok(refined)
    } else {
        Ok(p.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matsolve::dense::{mat, scalar, zeros};

    #[test]
    fn zero_dynamics_give_q() {
        let p = solve_dare(&zeros(2, 2), &eye(2), &eye(2), &eye(2)).unwrap();
        assert!((&p - eye(2)).amax() < 1e-14);
    }

    #[test]
    fn scalar_closed_form() {
        // p = a^2 p - a^2 p^2 / (p + r) + q with a = 2, q = r = 1
        // => p^2 - 4 p - 1 = 0 => p = 2 + sqrt(5)
        let p = solve_dare(&scalar(2.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((p[(0, 0)] - (2.0 + 5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn unstabilizable_is_reported() {
        let err = solve_dare(&scalar(2.0), &scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap_err();
        assert_eq!(err, Error::NonStabilizable("A, B"));
    }

    #[test]
    fn undetectable_is_reported() {
        let err = solve_dare(&scalar(2.0), &scalar(1.0), &scalar(0.0), &scalar(1.0)).unwrap_err();
        assert_eq!(err, Error::NonDetectable("A, Q^1/2"));
    }

    #[test]
    fn doyle_control_riccati_expansion() {
        // P = 11^T + sqrt(s) [[4,2],[2,1]] + O(s); the remainder is about
        // 0.02 sqrt(s) at s = 1e-6 and shrinks like sqrt(s) relative to it.
        let a = mat(&[&[2.0, 1.0], &[0.0, 2.0]]);
        let b = mat(&[&[0.0], &[1.0]]);
        let q = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let lead = mat(&[&[4.0, 2.0], &[2.0, 1.0]]);
        let mut prev = f64::INFINITY;
        for sigma in [1e-6f64, 1e-8, 1e-10] {
            let sol = solve_dare_with(&a, &b, &q, &scalar(sigma), &Tolerances::default()).unwrap();
            let rem = (&sol.p - &q - &lead * sigma.sqrt()).norm() / sigma.sqrt();
            assert!(rem <= 0.03 && rem < prev, "sigma={sigma}: {rem}");
            assert!(sol.residual <= 1e-10 * (1.0 + sol.p.norm()));
            prev = rem;
        }
        assert!(prev <= 0.01);
    }
}
