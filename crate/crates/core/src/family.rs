//! Parametric plant families `theta -> PlantInstance` and their directional
//! derivatives.

use crate::error::{Error, Result};
use crate::lqg::PlantInstance;
use crate::matsolve::dense::{zeros, Mat};

/// Derivatives of the plant matrices along one parameter direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantDerivative {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub sigma_w: Mat,
    pub sigma_v: Mat,
}

impl PlantDerivative {
    pub fn zero(n: usize, du: usize, dy: usize) -> Self {
        Self { a: zeros(n, n), b: zeros(n, du), c: zeros(dy, n), sigma_w: zeros(n, n), sigma_v: zeros(dy, dy) }
    }

    pub fn zero_like(plant: &PlantInstance) -> Self {
        Self::zero(plant.n(), plant.du(), plant.dy())
    }

    pub fn is_zero(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.sigma_w, &self.sigma_v].iter().all(|m| m.iter().all(|&x| x == 0.0))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            a: &self.a * k,
            b: &self.b * k,
            c: &self.c * k,
            sigma_w: &self.sigma_w * k,
            sigma_v: &self.sigma_v * k,
        }
    }

    /// `self + k * other`
    pub fn axpy(&self, k: f64, other: &Self) -> Self {
        Self {
            a: &self.a + &other.a * k,
            b: &self.b + &other.b * k,
            c: &self.c + &other.c * k,
            sigma_w: &self.sigma_w + &other.sigma_w * k,
            sigma_v: &self.sigma_v + &other.sigma_v * k,
        }
    }

    /// Central difference `(plus - minus) / (2 h)`.
    pub fn central(plus: &PlantInstance, minus: &PlantInstance, h: f64) -> Self {
        let d = |p: &Mat, m: &Mat| (p - m) / (2.0 * h);
        Self {
            a: d(&plus.a, &minus.a),
            b: d(&plus.b, &minus.b),
            c: d(&plus.c, &minus.c),
            sigma_w: d(&plus.sigma_w, &minus.sigma_w),
            sigma_v: d(&plus.sigma_v, &minus.sigma_v),
        }
    }
}

/// A plant family indexed by a real parameter vector.
pub trait ParametricFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, theta: &[f64]) -> Result<PlantInstance>;

    /// Derivative of the plant matrices at `theta` along `v`. The default is a
    /// central difference with step `1e-5 (1 + |theta|)`.
    fn derivative(&self, theta: &[f64], v: &[f64]) -> Result<PlantDerivative> {
        check_dim(self.dim(), theta, v)?;
        if v.iter().all(|&x| x == 0.0) {
            return Ok(PlantDerivative::zero_like(&self.eval(theta)?));
        }
        let h = default_step(theta);
        let (plus, minus) = (self.eval(&shift(theta, v, h))?, self.eval(&shift(theta, v, -h))?);
        Ok(PlantDerivative::central(&plus, &minus, h))
    }
}

pub(crate) fn check_dim(dim: usize, theta: &[f64], v: &[f64]) -> Result<()> {
    if theta.len() != dim || v.len() != dim {
        return Err(Error::Dimension(format!(
            "family has {dim} parameters, got theta of length {} and direction of length {}",
            theta.len(),
            v.len()
        )));
    }
    Ok(())
}

/// `1e-5 (1 + |theta|)`
pub fn default_step(theta: &[f64]) -> f64 {
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    1e-5 * (1.0 + norm)
}

pub fn shift(theta: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    theta.iter().zip(v).map(|(a, b)| a + t * b).collect()
}

/// `theta -> plant0 + sum_i (theta_i - theta0_i) D_i` with exact derivatives.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    pub theta0: Vec<f64>,
    pub plant0: PlantInstance,
    pub directions: Vec<PlantDerivative>,
}

impl AffineFamily {
    pub fn new(theta0: Vec<f64>, plant0: PlantInstance, directions: Vec<PlantDerivative>) -> Result<Self> {
        if theta0.len() != directions.len() {
            return Err(Error::Dimension("one direction per parameter required".into()));
        }
        for d in &directions {
            let z = PlantDerivative::zero_like(&plant0);
            if d.a.shape() != z.a.shape()
                || d.b.shape() != z.b.shape()
                || d.c.shape() != z.c.shape()
                || d.sigma_w.shape() != z.sigma_w.shape()
                || d.sigma_v.shape() != z.sigma_v.shape()
            {
                return Err(Error::Dimension("direction matrices do not match the plant".into()));
            }
        }
        Ok(Self { theta0, plant0, directions })
    }

    /// Scalar family `theta -> plant0 + (theta - theta0) D`.
    pub fn scalar(theta0: f64, plant0: PlantInstance, direction: PlantDerivative) -> Result<Self> {
        Self::new(vec![theta0], plant0, vec![direction])
    }

    fn combination(&self, v: &[f64]) -> PlantDerivative {
        let mut out = PlantDerivative::zero_like(&self.plant0);
        for (vi, d) in v.iter().zip(&self.directions) {
            if *vi != 0.0 {
                out = out.axpy(*vi, d);
            }
        }
        out
    }
}

impl ParametricFamily for AffineFamily {
    fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn eval(&self, theta: &[f64]) -> Result<PlantInstance> {
        check_dim(self.dim(), theta, theta)?;
        let delta: Vec<f64> = theta.iter().zip(&self.theta0).map(|(a, b)| a - b).collect();
        let d = self.combination(&delta);
        let p = &self.plant0;
        PlantInstance::new(
            &p.a + d.a,
            &p.b + d.b,
            &p.c + d.c,
            &p.sigma_w + d.sigma_w,
            &p.sigma_v + d.sigma_v,
            p.q.clone(),
            p.r.clone(),
        )
    }

    fn derivative(&self, theta: &[f64], v: &[f64]) -> Result<PlantDerivative> {
        check_dim(self.dim(), theta, v)?;
        Ok(self.combination(v))
    }
}

type PlantFn = dyn Fn(&[f64]) -> Result<PlantInstance> + Send + Sync;

/// Family given by a closure; derivatives by central differences.
pub struct ClosureFamily {
    dim: usize,
    f: Box<PlantFn>,
}

impl ClosureFamily {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Result<PlantInstance> + Send + Sync + 'static) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl ParametricFamily for ClosureFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<PlantInstance> {
        check_dim(self.dim, theta, theta)?;
        (self.f)(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matsolve::dense::{eye, mat, scalar};

    fn plant(b1: f64) -> PlantInstance {
        PlantInstance::new(
            mat(&[&[0.5, 0.2], &[0.0, 1.2]]),
            mat(&[&[b1], &[1.0]]),
            mat(&[&[1.0, 1.0]]),
            eye(2),
            scalar(1.0),
            eye(2),
            scalar(1.0),
        )
        .unwrap()
    }

    #[test]
    fn closure_fd_matches_affine() {
        let mut dir = PlantDerivative::zero(2, 1, 1);
        dir.b[(0, 0)] = 1.0;
        let aff = AffineFamily::scalar(0.3, plant(0.3), dir.clone()).unwrap();
        let clo = ClosureFamily::new(1, |t| Ok(plant(t[0])));
        let fd = clo.derivative(&[0.3], &[2.0]).unwrap();
        let ex = aff.derivative(&[0.3], &[2.0]).unwrap();
        assert!((fd.b - ex.b).amax() < 1e-9);
        assert_eq!(aff.eval(&[0.7]).unwrap(), plant(0.7));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let aff = AffineFamily::scalar(0.3, plant(0.3), PlantDerivative::zero(2, 1, 1)).unwrap();
        assert!(matches!(aff.eval(&[0.1, 0.2]), Err(Error::Dimension(_))));
    }
}
