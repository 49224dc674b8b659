//! H2 and H-infinity norms of stable discrete-time realizations.

use num_complex::Complex64;

use super::dense::{eye, inverse, op_norm, op_norm_c, spectral_radius, Mat};
use super::lyapunov::solve_dlyap_with;
use super::statespace::StateSpaceTF;
use crate::config::Tolerances;
use crate::error::{Error, Result};

fn check_stable(sys: &StateSpaceTF, tol: &Tolerances) -> Result<()> {
    let rho = spectral_radius(&sys.a);
    if sys.order() > 0 && !(rho < 1.0 - tol.stability_margin) {
        return Err(Error::Unstable(rho));
    }
    Ok(())
}

/// `tr(C dlyap(A, B B^T) C^T) + tr(D D^T)`
pub fn h2_norm_sq(sys: &StateSpaceTF) -> Result<f64> {
    let tol = Tolerances::default();
    check_stable(sys, &tol)?;
    let static_part = sys.d.norm_squared();
    if sys.order() == 0 {
        return Ok(static_part);
    }
    let x = solve_dlyap_with(&sys.a, &(&sys.b * sys.b.transpose()), &tol)?.x;
    Ok((&sys.c * x * sys.c.transpose()).trace().max(0.0) + static_part)
}

/// Peak gain `max_w sigma_max(G(e^{iw}))` to relative accuracy `tol`.
///
/// The system is mapped to continuous time by the bilinear transform (which
/// preserves the peak gain), and each bisection level `gamma` is tested
/// for imaginary-axis eigenvalues of the associated Hamiltonian matrix. Crossing
/// frequencies found by the test raise the lower bound directly.
pub fn hinf_norm(sys: &StateSpaceTF, tol: f64) -> Result<f64> {
    hinf_norm_with(sys, tol, &Tolerances::default())
}

pub fn hinf_norm_with(sys: &StateSpaceTF, tol: f64, cfg: &Tolerances) -> Result<f64> {
    check_stable(sys, cfg)?;
    let d_gain = op_norm(&sys.d);
    if sys.order() == 0 || op_norm(&sys.b) * op_norm(&sys.c) == 0.0 {
        return Ok(d_gain);
    }
    let (grid_gain, _) = sys.grid_peak(cfg.hinf_grid_points)?;
    let mut lo = grid_gain.max(d_gain);
    if lo == 0.0 {
        return Ok(0.0);
    }
    let ct = Cayley::new(sys)?;
    let gain_at = |w: f64| -> Result<f64> { Ok(op_norm_c(&sys.freq(w)?)) };

    // Find an upper bound with no genuine crossings.
    let mut hi = 2.0 * lo;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > cfg.hinf_max_iterations {
            return Err(Error::NoConvergence { what: "H-infinity bracket", iterations });
        }
        match genuine_crossing(&ct, hi, &gain_at)? {
            Some(g) => {
                lo = lo.max(g);
                hi = 2.0 * lo.max(hi);
            }
            None => break,
        }
    }
    while hi - lo > tol * lo {
        iterations += 1;
        if iterations > cfg.hinf_max_iterations {
            return Err(Error::NoConvergence { what: "H-infinity bisection", iterations });
        }
        let mid = 0.5 * (lo + hi);
        match genuine_crossing(&ct, mid, &gain_at)? {
            Some(g) => lo = lo.max(g).max(mid),
            None => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest gain at the frequencies where `gamma` is crossed, if any of them
/// actually reaches `gamma`.
fn genuine_crossing(
    ct: &Cayley,
    gamma: f64,
    gain_at: &dyn Fn(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let freqs = ct.crossings(gamma)?;
    let mut best: Option<f64> = None;
    for wc in freqs {
        let w = 2.0 * wc.atan();
        let g = gain_at(w)?;
        if g >= gamma * (1.0 - 1e-6) {
            best = Some(best.map_or(g, |b: f64| b.max(g)));
        }
    }
    Ok(best)
}

/// Continuous-time realization with the same frequency response on the
/// imaginary axis, `s = (z - 1) / (z + 1)`.
struct Cayley {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl Cayley {
    fn new(sys: &StateSpaceTF) -> Result<Self> {
        let n = sys.order();
        let api = inverse(&(&sys.a + eye(n)), "A + I")?;
        let s2 = std::f64::consts::SQRT_2;
        Ok(Self {
            a: &api * (&sys.a - eye(n)),
            b: &api * &sys.b * s2,
            c: &sys.c * &api * s2,
            d: &sys.d - &sys.c * &api * &sys.b,
        })
    }

    /// Nonnegative imaginary parts of the Hamiltonian's imaginary-axis
    /// eigenvalues at level `gamma`.
    fn crossings(&self, gamma: f64) -> Result<Vec<f64>> {
        let n = self.a.nrows();
        let m = self.d.ncols();
        let p = self.d.nrows();
        let r = eye(m) * (gamma * gamma) - self.d.transpose() * &self.d;
        let r_inv = match r.clone().cholesky() {
            Some(ch) => ch.inverse(),
            // gamma below sigma_max(D_c): the gain at infinity crosses it.
            None => return Ok(vec![f64::INFINITY]),
        };
        let a11 = &self.a + &self.b * &r_inv * self.d.transpose() * &self.c;
        let g = &self.b * &r_inv * self.b.transpose();
        let s = eye(p) + &self.d * &r_inv * self.d.transpose();
        let h21 = -(self.c.transpose() * s * &self.c);
        let mut ham = Mat::zeros(2 * n, 2 * n);
        ham.view_mut((0, 0), (n, n)).copy_from(&a11);
        ham.view_mut((0, n), (n, n)).copy_from(&g);
        ham.view_mut((n, 0), (n, n)).copy_from(&h21);
        ham.view_mut((n, n), (n, n)).copy_from(&(-a11.transpose()));
        let scale = op_norm(&ham).max(1.0);
        let eig: Vec<Complex64> = ham.complex_eigenvalues().iter().copied().collect();
        Ok(eig
            .into_iter()
            .filter(|l| l.re.abs() <= 1e-7 * scale && l.im >= 0.0)
            .map(|l| l.im)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matsolve::dense::{mat, scalar};

    #[test]
    fn scalar_first_order() {
        let g = StateSpaceTF::new(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!((h2_norm_sq(&g).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!((hinf_norm(&g, 1e-9).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn static_gain_norms() {
        let g = StateSpaceTF::static_gain(mat(&[&[3.0, 0.0], &[0.0, 4.0]]));
        assert_eq!(h2_norm_sq(&g).unwrap(), 25.0);
        assert!((hinf_norm(&g, 1e-9).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_peak_between_grid_points() {
        // Lightly damped pole pair at angle 0.123 rad.
        let (r, w0): (f64, f64) = (0.9995, 0.123);
        let a = mat(&[&[r * w0.cos(), -r * w0.sin()], &[r * w0.sin(), r * w0.cos()]]);
        let g = StateSpaceTF::new(a, mat(&[&[1.0], &[0.0]]), mat(&[&[0.0, 1.0]]), scalar(0.0)).unwrap();
        let val = hinf_norm(&g, 1e-10).unwrap();
        // Refine by golden section around the grid maximum.
        let f = |w: f64| op_norm_c(&g.freq(w).unwrap());
        let (mut lo, mut hi) = (0.10, 0.15);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if f(x1) > f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let oracle = f(0.5 * (lo + hi));
        assert!((val - oracle).abs() <= 1e-6 * oracle, "{val} vs {oracle}");
    }

    #[test]
    fn unstable_rejected() {
        let g = StateSpaceTF::new(scalar(1.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!(matches!(h2_norm_sq(&g), Err(Error::Unstable(_))));
        assert!(matches!(hinf_norm(&g, 1e-9), Err(Error::Unstable(_))));
    }
}
