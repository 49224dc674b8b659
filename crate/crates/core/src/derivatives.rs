//! First-order sensitivities of the LQG solution to a parameter direction.

use crate::error::Result;
use crate::family::{default_step, shift, ParametricFamily, PlantDerivative};
use crate::lqg::{synthesize, LqgSolution, PlantInstance};
use crate::matsolve::dense::{eye, inverse, sym, symmetrize, zeros, Mat};
use crate::matsolve::solve_dlyap;

#[derive(Debug, Clone, PartialEq)]
pub struct GainDerivatives {
    pub f_dot: Mat,
    pub l_dot: Mat,
    pub p_dot: Mat,
    pub sigma_dot: Mat,
    pub sigma_e_dot: Mat,
    /// Derivative of the filter gain `Sigma C^T Sigma_e^{-1}`.
    pub l_bar_dot: Mat,
}

impl GainDerivatives {
    pub fn zero(plant: &PlantInstance) -> Self {
        let (n, du, dy) = (plant.n(), plant.du(), plant.dy());
        Self {
            f_dot: zeros(du, n),
            l_dot: zeros(n, dy),
            p_dot: zeros(n, n),
            sigma_dot: zeros(n, n),
            sigma_e_dot: zeros(dy, dy),
            l_bar_dot: zeros(n, dy),
        }
    }

    fn fields(&self) -> [(&'static str, &Mat); 6] {
        [
            ("F_dot", &self.f_dot),
            ("L_dot", &self.l_dot),
            ("P_dot", &self.p_dot),
            ("Sigma_dot", &self.sigma_dot),
            ("Sigma_e_dot", &self.sigma_e_dot),
            ("Lbar_dot", &self.l_bar_dot),
        ]
    }

    /// Largest per-matrix `|self - other|_F / (1 + |self|_F)`.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .map(|((_, a), (_, b))| (*a - *b).norm() / (1.0 + a.norm()))
            .fold(0.0, f64::max)
    }
}

/// Plant, solution, plant derivative and gain derivatives at one point.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub plant: PlantInstance,
    pub sol: LqgSolution,
    pub dplant: PlantDerivative,
    pub gains: GainDerivatives,
}

pub fn linearize(family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<Linearization> {
    let plant = family.eval(theta)?;
    let sol = synthesize(&plant)?;
    let dplant = family.derivative(theta, v)?;
    let gains = gain_derivatives(&plant, &sol, &dplant)?;
    Ok(Linearization { plant, sol, dplant, gains })
}

pub fn directional_derivatives(family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<GainDerivatives> {
    Ok(linearize(family, theta, v)?.gains)
}

/// Analytic gain derivatives from the differentiated Riccati equations.
pub fn gain_derivatives(plant: &PlantInstance, sol: &LqgSolution, d: &PlantDerivative) -> Result<GainDerivatives> {
    if d.is_zero() {
        return Ok(GainDerivatives::zero(plant));
    }
    let (b, c) = (&plant.b, &plant.c);
    let (p, sigma, f, l) = (&sol.p, &sol.sigma, &sol.f, &sol.l);
    let (acl, aclo) = (&sol.a_cl_c, &sol.a_cl_o);
    let psi_inv = inverse(&sol.psi, "Psi")?;
    let se_inv = inverse(&sol.sigma_e, "Sigma_e")?;

    let a_f = &d.a + &d.b * f;
    let p_dot = solve_dlyap(&acl.transpose(), &sym(&(acl.transpose() * p * &a_f)))?;
    let f_dot = -&psi_inv
        * (d.b.transpose() * p * acl + b.transpose() * p * &a_f + b.transpose() * &p_dot * acl);

    let a_l = &d.a - l * &d.c;
    let sigma_rhs = sym(&(aclo * sigma * a_l.transpose())) + &d.sigma_w + l * &d.sigma_v * l.transpose();
    let sigma_dot = solve_dlyap(aclo, &symmetrize(&sigma_rhs))?;
    let l_dot = (aclo * sigma * d.c.transpose() + aclo * &sigma_dot * c.transpose()
        + &a_l * sigma * c.transpose()
        - l * &d.sigma_v)
        * &se_inv;
    let sigma_e_dot = symmetrize(
        &(&d.c * sigma * c.transpose() + c * &sigma_dot * c.transpose() + c * sigma * d.c.transpose()
            + &d.sigma_v),
    );
    let l_bar = sigma * c.transpose() * &se_inv;
    let i_lc = eye(plant.n()) - &l_bar * c;
    let l_bar_dot = (&i_lc * sigma * d.c.transpose() + &i_lc * &sigma_dot * c.transpose()
        - &l_bar * &d.c * sigma * c.transpose()
        - &l_bar * &d.sigma_v)
        * &se_inv;
    Ok(GainDerivatives { f_dot, l_dot, p_dot: symmetrize(&p_dot), sigma_dot: symmetrize(&sigma_dot), sigma_e_dot, l_bar_dot })
}

/// Central differences of `F, L, P, Sigma, Sigma_e, Lbar` along `v`.
/// `h = None` uses `1e-5 (1 + |theta|)`.
pub fn finite_diff_derivatives(
    family: &dyn ParametricFamily,
    theta: &[f64],
    v: &[f64],
    h: Option<f64>,
) -> Result<GainDerivatives> {
    if v.iter().all(|&x| x == 0.0) {
        return Ok(GainDerivatives::zero(&family.eval(theta)?));
    }
    let h = h.unwrap_or_else(|| default_step(theta));
    let at = |t: f64| -> Result<(PlantInstance, LqgSolution)> {
        let plant = family.eval(&shift(theta, v, t))?;
        let sol = synthesize(&plant)?;
        Ok((plant, sol))
    };
    let ((pp, sp), (pm, sm)) = (at(h)?, at(-h)?);
    let diff = |x: &Mat, y: &Mat| (x - y) / (2.0 * h);
    Ok(GainDerivatives {
        f_dot: diff(&sp.f, &sm.f),
        l_dot: diff(&sp.l, &sm.l),
        p_dot: diff(&sp.p, &sm.p),
        sigma_dot: diff(&sp.sigma, &sm.sigma),
        sigma_e_dot: diff(&sp.sigma_e, &sm.sigma_e),
        l_bar_dot: diff(&sp.l_bar(&pp)?, &sm.l_bar(&pm)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ClosureFamily;
    use crate::matsolve::dense::{mat, scalar};

    fn family() -> ClosureFamily {
        ClosureFamily::new(1, |t| {
            let th = t[0];
            PlantInstance::new(
                mat(&[&[0.9 + 0.1 * th, 0.3], &[0.1 * th, 1.1]]),
                mat(&[&[0.2], &[1.0 + th]]),
                mat(&[&[1.0, 0.5 * th]]),
                mat(&[&[1.0 + th * th, 0.1], &[0.1, 1.0]]),
                scalar(0.5 + 0.2 * th),
                mat(&[&[1.0, 0.0], &[0.0, 2.0]]),
                scalar(1.0),
            )
        })
    }

    #[test]
    fn analytic_matches_finite_difference() {
        let fam = family();
        let an = directional_derivatives(&fam, &[0.4], &[1.0]).unwrap();
        let fd = finite_diff_derivatives(&fam, &[0.4], &[1.0], None).unwrap();
        assert!(an.max_rel_diff(&fd) < 1e-5, "{an:?}\n{fd:?}");
    }

    #[test]
    fn linear_in_direction() {
        let fam = family();
        let d1 = directional_derivatives(&fam, &[0.4], &[1.0]).unwrap();
        let d3 = directional_derivatives(&fam, &[0.4], &[-3.0]).unwrap();
        assert!((&d1.f_dot * -3.0 - &d3.f_dot).amax() <= 1e-6 * d3.f_dot.amax());
        let z = directional_derivatives(&fam, &[0.4], &[0.0]).unwrap();
        assert!(z.f_dot.iter().chain(z.sigma_dot.iter()).all(|&x| x == 0.0));
    }
}
