//! State-space realizations `C (zI - A)^{-1} B + D` of rational transfer
//! matrices, with series/parallel/feedback composition and order reduction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::{
    blkdiag, block, eye, from_rows, hstack, inverse, psd_sqrt, spectral_radius, to_complex,
    to_rows, vstack, zeros, CMat, Mat,
};
use super::lyapunov::solve_dlyap;
use super::pbh::{controllable_basis, orth};
use crate::config::Tolerances;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceTF {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpaceTF {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "realization: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn static_gain(d: Mat) -> Self {
        let (p, m) = d.shape();
        Self { a: zeros(0, 0), b: zeros(0, m), c: zeros(p, 0), d }
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(zeros(outputs, inputs))
    }

    pub fn identity(n: usize) -> Self {
        Self::static_gain(eye(n))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    /// True iff `D = 0` exactly.
    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0 - Tolerances::default().stability_margin
    }

    /// Transfer matrix at a complex point `z`.
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        let d = to_complex(&self.d);
        if self.order() == 0 {
            return Ok(d);
        }
        let n = self.order();
        let zi_a = CMat::from_diagonal_element(n, n, z) - to_complex(&self.a);
        let x = zi_a.lu().solve(&to_complex(&self.b)).ok_or(Error::Singular("zI - A"))?;
        Ok(to_complex(&self.c) * x + d)
    }

    /// Frequency response at `e^{i omega}`.
    pub fn freq(&self, omega: f64) -> Result<CMat> {
        self.eval(Complex64::from_polar(1.0, omega))
    }

    /// `self * other`: the signal passes through `other` first.
    pub fn mul(&self, other: &StateSpaceTF) -> Result<StateSpaceTF> {
        if self.inputs() != other.outputs() {
            return Err(Error::Dimension(format!(
                "series: {} inputs vs {} outputs",
                self.inputs(),
                other.outputs()
            )));
        }
        let bc = &self.b * &other.c;
        let a = block(&[&[Some(&self.a), Some(&bc)], &[None, Some(&other.a)]]);
        let a = fix_shape(a, self.order() + other.order());
        let b = vstack(&(&self.b * &other.d), &other.b);
        let c = hstack(&self.c, &(&self.d * &other.c));
        let d = &self.d * &other.d;
        StateSpaceTF::new(a, b, c, d)
    }

    pub fn add(&self, other: &StateSpaceTF) -> Result<StateSpaceTF> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::Dimension("parallel: shape mismatch".into()));
        }
        StateSpaceTF::new(
            blkdiag(&self.a, &other.a),
            vstack(&self.b, &other.b),
            hstack(&self.c, &other.c),
            &self.d + &other.d,
        )
    }

    pub fn neg(&self) -> StateSpaceTF {
        StateSpaceTF { a: self.a.clone(), b: self.b.clone(), c: -&self.c, d: -&self.d }
    }

    pub fn sub(&self, other: &StateSpaceTF) -> Result<StateSpaceTF> {
        self.add(&other.neg())
    }

    /// `M * G` for a static matrix `M`.
    pub fn scale_left(&self, m: &Mat) -> Result<StateSpaceTF> {
        StateSpaceTF::static_gain(m.clone()).mul(self)
    }

    /// `G * M` for a static matrix `M`.
    pub fn scale_right(&self, m: &Mat) -> Result<StateSpaceTF> {
        self.mul(&StateSpaceTF::static_gain(m.clone()))
    }

    /// Block row `[self, other]` (inputs stacked).
    pub fn hconcat(&self, other: &StateSpaceTF) -> Result<StateSpaceTF> {
        if self.outputs() != other.outputs() {
            return Err(Error::Dimension("hconcat: output mismatch".into()));
        }
        StateSpaceTF::new(
            blkdiag(&self.a, &other.a),
            blkdiag(&self.b, &other.b),
            hstack(&self.c, &other.c),
            hstack(&self.d, &other.d),
        )
    }

    /// Block column `[self; other]` (shared input).
    pub fn vconcat(&self, other: &StateSpaceTF) -> Result<StateSpaceTF> {
        if self.inputs() != other.inputs() {
            return Err(Error::Dimension("vconcat: input mismatch".into()));
        }
        StateSpaceTF::new(
            blkdiag(&self.a, &other.a),
            vstack(&self.b, &other.b),
            blkdiag(&self.c, &other.c),
            vstack(&self.d, &other.d),
        )
    }

    /// Inverse system; requires an invertible feedthrough.
    pub fn inverse(&self) -> Result<StateSpaceTF> {
        let d_inv = inverse(&self.d, "feedthrough D")?;
        StateSpaceTF::new(
            &self.a - &self.b * &d_inv * &self.c,
            &self.b * &d_inv,
            -&d_inv * &self.c,
            d_inv,
        )
    }

    /// `(I - G)^{-1}` for square `G`.
    pub fn inv_identity_minus(&self) -> Result<StateSpaceTF> {
        let p = self.outputs();
        if p != self.inputs() {
            return Err(Error::Dimension("(I - G)^{-1} needs square G".into()));
        }
        let e = inverse(&(eye(p) - &self.d), "I - D").map_err(|_| Error::IllPosed)?;
        StateSpaceTF::new(
            &self.a + &self.b * &e * &self.c,
            &self.b * &e,
            &e * &self.c,
            e,
        )
    }

    /// `(T^{-1} A T, T^{-1} B, C T, D)`
    pub fn similarity(&self, t: &Mat) -> Result<StateSpaceTF> {
        let t_inv = inverse(t, "similarity transform")?;
        StateSpaceTF::new(&t_inv * &self.a * t, &t_inv * &self.b, &self.c * t, self.d.clone())
    }

    /// Project onto a state subspace with orthonormal basis `v` (n x r).
    fn project(&self, v: &Mat) -> StateSpaceTF {
        let vt = v.transpose();
        StateSpaceTF {
            a: fix_shape(&vt * &self.a * v, v.ncols()),
            b: &vt * &self.b,
            c: &self.c * v,
            d: self.d.clone(),
        }
    }

    /// Remove uncontrollable then unobservable modes (orthogonal staircase).
    /// Unstable modes that cancel in a composition are removed here as well.
    pub fn minimal_realization(&self, rel_tol: f64) -> StateSpaceTF {
        if self.order() == 0 {
            return self.clone();
        }
        let vc = controllable_basis(&self.a, &self.b, rel_tol);
        let ctrb = self.project(&vc);
        if ctrb.order() == 0 {
            return ctrb;
        }
        let vo = controllable_basis(&ctrb.a.transpose(), &ctrb.c.transpose(), rel_tol);
        ctrb.project(&vo)
    }

    /// Hankel singular values of a stable realization.
    pub fn hankel_singular_values(&self) -> Result<Vec<f64>> {
        let (lc, lo) = self.gramian_factors()?;
        let prod = lo.transpose() * lc;
        Ok(prod.singular_values().iter().copied().collect())
    }

    fn gramian_factors(&self) -> Result<(Mat, Mat)> {
        let wc = solve_dlyap(&self.a, &(&self.b * self.b.transpose()))?;
        let wo = solve_dlyap(&self.a.transpose(), &(self.c.transpose() * &self.c))?;
        Ok((psd_sqrt(&wc), psd_sqrt(&wo)))
    }

    /// Square-root balanced truncation of a stable realization, discarding
    /// states whose Hankel singular value is below `cutoff * max(1, hsv_1)`.
    pub fn balanced_truncation(&self, cutoff: f64) -> Result<StateSpaceTF> {
        if self.order() == 0 {
            return Ok(self.clone());
        }
        let (lc, lo) = self.gramian_factors()?;
        let svd = (lo.transpose() * &lc).svd(true, true);
        let (u, vt) = (svd.u.expect("U"), svd.v_t.expect("V^T"));
        let hsv = &svd.singular_values;
        let top = hsv.max().max(1.0);
        let keep: Vec<usize> = (0..hsv.len()).filter(|&i| hsv[i] > cutoff * top).collect();
        let r = keep.len();
        if r == 0 {
            return Ok(StateSpaceTF::static_gain(self.d.clone()));
        }
        // T = Lc V S^{-1/2}, T_left = S^{-1/2} U^T Lo^T
        let mut t = zeros(self.order(), r);
        let mut tl = zeros(r, self.order());
        for (k, &i) in keep.iter().enumerate() {
            let s = hsv[i].sqrt();
            t.set_column(k, &((&lc * vt.row(i).transpose()) / s));
            tl.set_row(k, &((u.column(i).transpose() * lo.transpose()) / s));
        }
        StateSpaceTF::new(fix_shape(&tl * &self.a * &t, r), &tl * &self.b, &self.c * &t, self.d.clone())
    }

    /// Transpose system `G(z)^T`.
    pub fn transpose(&self) -> StateSpaceTF {
        StateSpaceTF {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    /// Maximum of `sigma_max(G(e^{i w}))` over an equispaced grid on `[0, pi]`.
    pub fn grid_peak(&self, points: usize) -> Result<(f64, f64)> {
        let mut best = (0.0, 0.0);
        for k in 0..points {
            let w = std::f64::consts::PI * k as f64 / (points - 1).max(1) as f64;
            let g = super::dense::op_norm_c(&self.freq(w)?);
            if g > best.0 {
                best = (g, w);
            }
        }
        Ok(best)
    }
}

/// nalgebra block helpers lose the size of zero-dimension blocks.
fn fix_shape(a: Mat, n: usize) -> Mat {
    if a.shape() == (n, n) {
        a
    } else {
        zeros(n, n)
    }
}

/// Orthonormal range basis, exposed for reductions elsewhere.
pub fn range_basis(z: &Mat, rel_tol: f64) -> Mat {
    let scale = super::dense::op_norm(z);
    orth(z, rel_tol * scale)
}

#[derive(Serialize, Deserialize)]
struct RealizationJson {
    #[serde(rename = "A", default)]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B", default)]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C", default)]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

impl Serialize for StateSpaceTF {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RealizationJson { a: to_rows(&self.a), b: to_rows(&self.b), c: to_rows(&self.c), d: to_rows(&self.d) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpaceTF {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RealizationJson::deserialize(de)?;
        let d = from_rows(&raw.d, "D").map_err(D::Error::custom)?;
        let a = from_rows(&raw.a, "A").map_err(D::Error::custom)?;
        let n = a.nrows();
        let (p, m) = d.shape();
        let a = if n == 0 { zeros(0, 0) } else { a };
        let b = if n == 0 { zeros(0, m) } else { from_rows(&raw.b, "B").map_err(D::Error::custom)? };
        let c = if n == 0 { zeros(p, 0) } else { from_rows(&raw.c, "C").map_err(D::Error::custom)? };
        StateSpaceTF::new(a, b, c, d).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matsolve::dense::{mat, scalar};

    fn first_order(a: f64, b: f64, c: f64, d: f64) -> StateSpaceTF {
        StateSpaceTF::new(scalar(a), scalar(b), scalar(c), scalar(d)).unwrap()
    }

    #[test]
    fn series_and_parallel_match_pointwise_products() {
        let g1 = first_order(0.5, 1.0, 2.0, 0.1);
        let g2 = first_order(-0.3, 0.7, 1.0, 0.0);
        let z = Complex64::from_polar(1.0, 0.7);
        let prod = g1.mul(&g2).unwrap().eval(z).unwrap()[(0, 0)];
        let want = g1.eval(z).unwrap()[(0, 0)] * g2.eval(z).unwrap()[(0, 0)];
        assert!((prod - want).norm() < 1e-14);
        let sum = g1.add(&g2).unwrap().eval(z).unwrap()[(0, 0)];
        assert!((sum - g1.eval(z).unwrap()[(0, 0)] - g2.eval(z).unwrap()[(0, 0)]).norm() < 1e-14);
    }

    #[test]
    fn inverse_and_feedback() {
        let g = first_order(0.5, 1.0, 2.0, 1.5);
        let z = Complex64::from_polar(1.0, 1.3);
        let gi = g.inverse().unwrap().eval(z).unwrap()[(0, 0)];
        assert!((gi * g.eval(z).unwrap()[(0, 0)] - 1.0).norm() < 1e-13);
        let fb = g.inv_identity_minus().unwrap().eval(z).unwrap()[(0, 0)];
        assert!((fb * (1.0 - g.eval(z).unwrap()[(0, 0)]) - 1.0).norm() < 1e-13);
    }

    #[test]
    fn minimal_realization_removes_cancelled_unstable_mode() {
        // (z - 2)/(z - 0.5) * 1/(z - 2): the unstable pole is unobservable
        // in the product order chosen here.
        let g1 = first_order(0.5, 1.0, -1.5, 1.0); // (z-2)/(z-0.5)
        let g2 = first_order(2.0, 1.0, 1.0, 0.0); // 1/(z-2)
        let prod = g1.mul(&g2).unwrap();
        assert_eq!(prod.order(), 2);
        let min = prod.minimal_realization(1e-9);
        assert_eq!(min.order(), 1);
        assert!(min.is_stable());
        let z = Complex64::from_polar(1.0, 0.4);
        let want = 1.0 / (z - 0.5);
        assert!((min.eval(z).unwrap()[(0, 0)] - want).norm() < 1e-12);
    }

    #[test]
    fn balanced_truncation_drops_zero_hankel_states() {
        let g = StateSpaceTF::new(
            mat(&[&[0.5, 0.0], &[0.0, 0.2]]),
            mat(&[&[1.0], &[0.0]]),
            mat(&[&[1.0, 1.0]]),
            scalar(0.0),
        )
        .unwrap();
        let red = g.balanced_truncation(1e-10).unwrap();
        assert_eq!(red.order(), 1);
        let z = Complex64::from_polar(1.0, 2.0);
        assert!((red.eval(z).unwrap() - g.eval(z).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_of_static_gain() {
        let g = StateSpaceTF::static_gain(mat(&[&[1.0, 2.0]]));
        let s = serde_json::to_string(&g).unwrap();
        let back: StateSpaceTF = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
