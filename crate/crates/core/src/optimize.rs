//! Bracketed scalar minimization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    /// The minimizer sits on (or within tolerance of) a bracket end.
    pub at_boundary: bool,
}

fn check_bracket(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BracketInvalid { lo, hi });
    }
    Ok(())
}

fn finite(x: f64, fx: f64) -> Result<f64> {
    if fx.is_finite() {
        Ok(fx)
    } else {
        Err(Error::NonFiniteObjective(x))
    }
}

/// Brent's method (golden section with parabolic steps) on `[lo, hi]`,
/// stopping when the bracket around the minimizer is below
/// `xtol * (1 + |x|)`.
pub fn brent(f: &mut dyn FnMut(f64) -> Result<f64>, lo: f64, hi: f64, xtol: f64) -> Result<ScalarMin> {
    check_bracket(lo, hi)?;
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = finite(x, f(x)?)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    let mut evaluations = 1;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol = 0.5 * xtol * (1.0 + x.abs());
        let tol2 = 2.0 * tol;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol } else { -tol };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = finite(u, f(u)?)?;
        evaluations += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    // Brent never evaluates the ends; compare against them explicitly.
    let mut best = (x, fx);
    for end in [lo, hi] {
        if let Ok(fe) = f(end) {
            evaluations += 1;
            if fe.is_finite() && fe < best.1 {
                best = (end, fe);
            }
        }
    }
    let edge = 4.0 * xtol * (1.0 + best.0.abs());
    let at_boundary = (best.0 - lo).abs() <= edge.max(1e-6 * (hi - lo)) || (hi - best.0).abs() <= edge.max(1e-6 * (hi - lo));
    Ok(ScalarMin { x: best.0, fx: best.1, evaluations, at_boundary })
}

/// Golden-section search on `[lo, hi]` down to width `xtol * (1 + |x|)`.
pub fn golden_section(f: &mut dyn FnMut(f64) -> Result<f64>, lo: f64, hi: f64, xtol: f64) -> Result<ScalarMin> {
    check_bracket(lo, hi)?;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = finite(x1, f(x1)?)?;
    let mut f2 = finite(x2, f(x2)?)?;
    let mut evaluations = 2;
    while b - a > xtol * (1.0 + 0.5 * (a + b).abs()) && evaluations < 500 {
        if f1 <= f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - phi * (b - a);
            f1 = finite(x1, f(x1)?)?;
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + phi * (b - a);
            f2 = finite(x2, f(x2)?)?;
        }
        evaluations += 1;
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let at_boundary = x - lo <= 2.0 * (b - a) || hi - x <= 2.0 * (b - a);
    Ok(ScalarMin { x, fx, evaluations, at_boundary })
}

/// Evaluate `f` on `points` equispaced nodes of `[lo, hi]` (or log-spaced if
/// `log` is set), then refine around the best node by golden section.
pub fn grid_then_golden(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    points: usize,
    log: bool,
    xtol: f64,
) -> Result<(ScalarMin, Vec<(f64, f64)>)> {
    check_bracket(lo, hi)?;
    if points < 3 || (log && lo <= 0.0) {
        return Err(Error::InvalidParameter("grid needs 3 points and a positive bracket for log spacing".into()));
    }
    let node = |k: usize| {
        let s = k as f64 / (points - 1) as f64;
        if k == 0 {
            lo
        } else if k == points - 1 {
            hi
        } else if log {
            (lo.ln() + s * (hi.ln() - lo.ln())).exp()
        } else {
            lo + s * (hi - lo)
        }
    };
    let mut table = Vec::with_capacity(points);
    for k in 0..points {
        let x = node(k);
        table.push((x, finite(x, f(x)?)?));
    }
    let k_best = (0..points).min_by(|&i, &j| table[i].1.total_cmp(&table[j].1)).expect("nonempty grid");
    let (a, b) = (node(k_best.saturating_sub(1)), node((k_best + 1).min(points - 1)));
    let refined = golden_section(f, a, b, xtol)?;
    let mut best = if refined.fx <= table[k_best].1 {
        refined
    } else {
        ScalarMin { x: table[k_best].0, fx: table[k_best].1, evaluations: refined.evaluations, at_boundary: false }
    };
    best.evaluations += points;
    best.at_boundary = k_best == 0 || k_best == points - 1;
    Ok((best, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_interior_minimum() {
        let mut f = |x: f64| Ok((x - 0.3).powi(2) + 0.1 * (x - 0.3).powi(4));
        let r = brent(&mut f, -1.0, 2.0, 1e-10).unwrap();
        assert!((r.x - 0.3).abs() < 1e-8);
        assert!(!r.at_boundary);
        assert!(r.evaluations < 60);
    }

    #[test]
    fn brent_reports_boundary() {
        let mut f = |x: f64| Ok((x - 5.0).powi(2));
        let r = brent(&mut f, 0.0, 1.0, 1e-10).unwrap();
        assert_eq!(r.x, 1.0);
        assert!(r.at_boundary);
    }

    #[test]
    fn invalid_bracket_and_nonfinite() {
        let mut f = |x: f64| Ok(x);
        assert!(matches!(brent(&mut f, 1.0, 0.0, 1e-8), Err(Error::BracketInvalid { .. })));
        let mut g = |_: f64| Ok(f64::NAN);
        assert!(matches!(golden_section(&mut g, 0.0, 1.0, 1e-8), Err(Error::NonFiniteObjective(_))));
    }

    #[test]
    fn grid_refinement_beats_every_node() {
        let mut f = |x: f64| Ok((x.ln() - 0.7).powi(2) + 1.0);
        let (best, table) = grid_then_golden(&mut f, 0.5, 8.0, 33, true, 1e-10).unwrap();
        assert!((best.x - 0.7f64.exp()).abs() < 1e-7);
        assert!(table.iter().all(|&(_, v)| best.fx <= v));
    }
}
