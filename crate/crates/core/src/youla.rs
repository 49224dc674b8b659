//! Doubly coprime factorization around the optimal LQG controller, Youla
//! parameters of stabilizing controllers, and the excess cost they imply.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use serde::Serialize;

use crate::lqg::{closed_loop, evaluate_cost, LinearController, LqgSolution, PlantInstance};
use crate::matsolve::dense::{eye, hstack, op_norm_c, psd_sqrt, spectral_radius, vstack, zeros, CMat, Mat};
use crate::matsolve::{h2_norm_sq, hinf_norm, StateSpaceTF};

/// Right factors `[[M, U], [N, V]]` share the state matrix `A + BF`, left
/// factors `[[V~, -U~], [-N~, M~]]` share `A - LC`.
#[derive(Debug, Clone)]
pub struct CoprimeFactors {
    pub m: StateSpaceTF,
    pub u: StateSpaceTF,
    pub n: StateSpaceTF,
    pub v: StateSpaceTF,
    pub m_tilde: StateSpaceTF,
    pub u_tilde: StateSpaceTF,
    pub n_tilde: StateSpaceTF,
    pub v_tilde: StateSpaceTF,
    /// `M~^{-1} = (A, -L, -C, I)`.
    pub m_tilde_inv: StateSpaceTF,
}

pub fn coprime_factorization(plant: &PlantInstance, sol: &LqgSolution) -> CoprimeFactors {
    let (b, c, f, l) = (&plant.b, &plant.c, &sol.f, &sol.l);
    let (du, dy) = (plant.du(), plant.dy());
    let sys = |a: &Mat, b: &Mat, c: &Mat, d: Mat| StateSpaceTF { a: a.clone(), b: b.clone(), c: c.clone(), d };
    let (ac, ao) = (&sol.a_cl_c, &sol.a_cl_o);
    CoprimeFactors {
        m: sys(ac, b, f, eye(du)),
        u: sys(ac, l, f, zeros(du, dy)),
        n: sys(ac, b, c, zeros(dy, du)),
        v: sys(ac, l, c, eye(dy)),
        v_tilde: sys(ao, &-b, f, eye(du)),
        u_tilde: sys(ao, l, f, zeros(du, dy)),
        n_tilde: sys(ao, b, c, zeros(dy, du)),
        m_tilde: sys(ao, &-l, c, eye(dy)),
        m_tilde_inv: sys(&plant.a, &-l, &-c, eye(dy)),
    }
}

impl CoprimeFactors {
    /// `[[M, U], [N, V]]`
    pub fn right(&self) -> Result<StateSpaceTF> {
        let top = self.m.hconcat(&self.u)?;
        let bottom = self.n.hconcat(&self.v)?;
        Ok(StateSpaceTF {
            a: self.m.a.clone(),
            b: hstack(&self.m.b, &self.u.b),
            c: vstack(&self.m.c, &self.n.c),
            d: vstack(&top.d, &bottom.d),
        })
    }

    /// `[[V~, -U~], [-N~, M~]]`
    pub fn left(&self) -> StateSpaceTF {
        StateSpaceTF {
            a: self.v_tilde.a.clone(),
            b: hstack(&self.v_tilde.b, &-&self.u_tilde.b),
            c: vstack(&self.v_tilde.c, &self.m_tilde.c),
            d: eye(self.v_tilde.outputs() + self.m_tilde.outputs()),
        }
    }

    /// `|| left * right - I ||_inf`
    pub fn coprime_residual(&self) -> Result<f64> {
        let prod = self.left().mul(&self.right()?)?;
        let n = prod.outputs();
        hinf_norm(&prod.sub(&StateSpaceTF::identity(n))?, Tolerances::default().hinf)
    }

    /// `|| V~ U - U~ V ||_inf`
    pub fn orthogonality_residual(&self) -> Result<f64> {
        let res = self.v_tilde.mul(&self.u)?.sub(&self.u_tilde.mul(&self.v)?)?;
        hinf_norm(&res, Tolerances::default().hinf)
    }
}

#[derive(Debug, Clone)]
pub struct YoulaParameter {
    pub q: StateSpaceTF,
    /// State dimension of the unreduced composition.
    pub original_order: usize,
    pub reduced_order: usize,
}

fn require_stabilizing(plant: &PlantInstance, k: &LinearController) -> Result<()> {
    match closed_loop(plant, k) {
        Err(Error::ClosedLoopUnstable(rho)) => Err(Error::NotStabilizing(rho)),
        other => other.map(|_| ()),
    }
}

fn reduce(full: &StateSpaceTF) -> Result<YoulaParameter> {
    let tol = Tolerances::default();
    let minimal = full.minimal_realization(tol.minreal_rank);
    let rho = spectral_radius(&minimal.a);
    if minimal.order() > 0 && !(rho < 1.0 - tol.stability_margin) {
        return Err(Error::Unstable(rho));
    }
    let q = minimal.balanced_truncation(tol.hankel_cutoff)?;
    Ok(YoulaParameter { original_order: full.order(), reduced_order: q.order(), q })
}

/// Youla parameter of `K` relative to the factorization. `Q` maps the
/// innovation `y - C x_hat` to `u - F x_hat` in the closed loop, which gives a
/// stable realization of order `n + n_K` directly; it is then reduced.
pub fn youla_parameter(k: &LinearController, factors: &CoprimeFactors, plant: &PlantInstance) -> Result<YoulaParameter> {
    require_stabilizing(plant, k)?;
    let (f, l) = (&factors.m.c, &factors.u.b);
    let kr = &k.realization;
    let (n, nk) = (plant.n(), kr.order());
    let bdk = &plant.b * &kr.d;
    let mut a = zeros(n + nk, n + nk);
    a.view_mut((0, 0), (n, n)).copy_from(&(&plant.a + &bdk * &plant.c));
    a.view_mut((0, n), (n, nk)).copy_from(&(&plant.b * &kr.c));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&kr.b * &plant.c));
    a.view_mut((n, n), (nk, nk)).copy_from(&kr.a);
    let full = StateSpaceTF::new(
        a,
        vstack(&(l + &bdk), &kr.b),
        hstack(&(&kr.d * &plant.c - f), &kr.c),
        kr.d.clone(),
    )?;
    reduce(&full)
}

/// `Q = [V~  -U~] [K; I] (I - P K)^{-1} M~^{-1}` by series and feedback
/// composition. The unstable plant modes must cancel numerically, which fails
/// when `Q` is close to zero; use [`youla_parameter`] for production.
pub fn youla_parameter_composed(
    k: &LinearController,
    factors: &CoprimeFactors,
    plant: &PlantInstance,
) -> Result<YoulaParameter> {
    require_stabilizing(plant, k)?;
    let kr = &k.realization;
    let p = plant.transfer_u();
    let head = factors.v_tilde.mul(kr)?.sub(&factors.u_tilde)?;
    let sens = p.mul(kr)?.inv_identity_minus()?;
    reduce(&head.mul(&sens)?.mul(&factors.m_tilde_inv)?)
}

/// `|| Psi^{1/2} Q Sigma_e^{1/2} ||_H2^2`
pub fn excess_via_youla(q: &StateSpaceTF, sol: &LqgSolution) -> Result<f64> {
    let weighted = q.scale_left(&psd_sqrt(&sol.psi))?.scale_right(&psd_sqrt(&sol.sigma_e))?;
    h2_norm_sq(&weighted)
}

/// Midpoint grid on `(0, pi)`; skips `z = +-1`, where integrating plants have poles.
fn grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |k| std::f64::consts::PI * (k as f64 + 0.5) / points as f64)
}

fn solve_c(a: CMat, b: CMat) -> Result<CMat> {
    a.lu().solve(&b).ok_or(Error::Singular("frequency response"))
}

/// Largest relative mismatch between `K` and `(U + M Q)(V + N Q)^{-1}` over a
/// frequency grid.
pub fn reconstruction_error(q: &StateSpaceTF, factors: &CoprimeFactors, k: &LinearController, points: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in grid(points) {
        let qz = q.freq(w)?;
        let num = factors.u.freq(w)? + factors.m.freq(w)? * &qz;
        let den = factors.v.freq(w)? + factors.n.freq(w)? * &qz;
        // num den^{-1} = (den^{-T} num^T)^T
        let rec = solve_c(den.transpose(), num.transpose())?.transpose();
        let kz = k.realization.freq(w)?;
        worst = worst.max(op_norm_c(&(rec - &kz)) / (1.0 + op_norm_c(&kz)));
    }
    Ok(worst)
}

/// Largest mismatch between `P_u` and `N M^{-1}` over a frequency grid.
pub fn plant_factor_error(plant: &PlantInstance, factors: &CoprimeFactors, points: usize) -> Result<f64> {
    let p = plant.transfer_u();
    let mut worst: f64 = 0.0;
    for w in grid(points) {
        let nm = solve_c(factors.m.freq(w)?.transpose(), factors.n.freq(w)?.transpose())?.transpose();
        let pz = p.freq(w)?;
        worst = worst.max(op_norm_c(&(nm - &pz)) / (1.0 + op_norm_c(&pz)));
    }
    Ok(worst)
}

/// Observer-based controller with gains `alpha F` and `beta L`:
/// `(A - beta L C + alpha B F, beta L, alpha F, 0)`.
pub fn detuned_controller(plant: &PlantInstance, sol: &LqgSolution, alpha: f64, beta: f64) -> LinearController {
    let (f, l) = (&sol.f * alpha, &sol.l * beta);
    LinearController::new(StateSpaceTF {
        a: &plant.a - &l * &plant.c + &plant.b * &f,
        b: l,
        c: f,
        d: zeros(plant.du(), plant.dy()),
    })
}

/// Residuals of the factorization and of the excess-cost identity for one
/// stabilizing controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YoulaCheck {
    pub coprime_residual: f64,
    pub orthogonality_residual: f64,
    pub plant_factor_error: f64,
    pub reconstruction_error: f64,
    pub q_hinf: f64,
    pub q_order: usize,
    pub q_original_order: usize,
    pub controller_strictly_proper: bool,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    pub cost: f64,
    pub cost_gap: f64,
    pub youla_excess: f64,
    /// `|cost_gap - youla_excess| / (1 + youla_excess)`
    pub excess_residual: f64,
    pub warnings: Vec<String>,
}

pub fn youla_check(plant: &PlantInstance, sol: &LqgSolution, k: &LinearController, points: usize) -> Result<YoulaCheck> {
    let fac = coprime_factorization(plant, sol);
    let y = youla_parameter(k, &fac, plant)?;
    let cost = evaluate_cost(plant, k)?;
    let youla_excess = excess_via_youla(&y.q, sol)?;
    let cost_gap = cost - sol.j_star;
    let mut warnings = Vec::new();
    if !k.strictly_proper {
        warnings.push("controller has a feedthrough term; the excess identity assumes a strictly proper controller".into());
    }
    Ok(YoulaCheck {
        coprime_residual: fac.coprime_residual()?,
        orthogonality_residual: fac.orthogonality_residual()?,
        plant_factor_error: plant_factor_error(plant, &fac, points)?,
        reconstruction_error: reconstruction_error(&y.q, &fac, k, points)?,
        q_hinf: hinf_norm(&y.q, Tolerances::default().hinf)?,
        q_order: y.reduced_order,
        q_original_order: y.original_order,
        controller_strictly_proper: k.strictly_proper,
        j_star: sol.j_star,
        cost,
        cost_gap,
        youla_excess,
        excess_residual: (cost_gap - youla_excess).abs() / (1.0 + youla_excess),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqg::{lqg_controller, synthesize};
    use crate::matsolve::dense::{mat, scalar};

    fn doyle(sigma: f64) -> PlantInstance {
        let ones = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        PlantInstance::new(
            mat(&[&[2.0, 1.0], &[0.0, 2.0]]),
            mat(&[&[0.0], &[1.0]]),
            mat(&[&[1.0, 0.0]]),
            ones.clone(),
            scalar(sigma),
            ones,
            scalar(sigma),
        )
        .unwrap()
    }

    fn generic() -> PlantInstance {
        PlantInstance::new(
            mat(&[&[1.1, 0.4, 0.0], &[-0.2, 0.7, 0.3], &[0.0, 0.1, 0.9]]),
            mat(&[&[0.3, 0.0], &[1.0, 0.2], &[0.0, 1.0]]),
            mat(&[&[1.0, -0.5, 0.0], &[0.0, 0.2, 1.0]]),
            mat(&[&[1.0, 0.2, 0.0], &[0.2, 0.5, 0.0], &[0.0, 0.0, 0.3]]),
            mat(&[&[0.4, 0.1], &[0.1, 0.6]]),
            eye(3),
            mat(&[&[0.7, 0.0], &[0.0, 1.3]]),
        )
        .unwrap()
    }

    #[test]
    fn factorization_identities() {
        for plant in [doyle(0.01), generic()] {
            let sol = synthesize(&plant).unwrap();
            let fac = coprime_factorization(&plant, &sol);
            assert!(fac.coprime_residual().unwrap() <= 1e-8);
            assert!(fac.orthogonality_residual().unwrap() <= 1e-8);
            assert!(plant_factor_error(&plant, &fac, 256).unwrap() <= 1e-8);
            assert!(fac.u.is_strictly_proper());
            let mt = fac.m_tilde.mul(&fac.m_tilde_inv).unwrap();
            let (g, _) = mt.sub(&StateSpaceTF::identity(plant.dy())).unwrap().grid_peak(64).unwrap();
            assert!(g <= 1e-10);
        }
    }

    #[test]
    fn optimal_controller_has_zero_parameter() {
        let plant = doyle(0.01);
        let sol = synthesize(&plant).unwrap();
        let fac = coprime_factorization(&plant, &sol);
        let y = youla_parameter(&lqg_controller(&sol, &plant), &fac, &plant).unwrap();
        assert!(hinf_norm(&y.q, 1e-9).unwrap() <= 1e-8);
        assert_eq!(excess_via_youla(&StateSpaceTF::zero(1, 1), &sol).unwrap(), 0.0);
    }

    #[test]
    fn detuned_controller_excess_matches_cost_gap() {
        let plant = doyle(0.25);
        let sol = synthesize(&plant).unwrap();
        let fac = coprime_factorization(&plant, &sol);
        let k = detuned_controller(&plant, &sol, 0.9, 1.0);
        let y = youla_parameter(&k, &fac, &plant).unwrap();
        assert!(y.q.is_stable() && y.q.is_strictly_proper());
        assert!(y.reduced_order < y.original_order);
        assert!(reconstruction_error(&y.q, &fac, &k, 256).unwrap() <= 1e-7);
        let gap = evaluate_cost(&plant, &k).unwrap() - sol.j_star;
        let excess = excess_via_youla(&y.q, &sol).unwrap();
        assert!(gap > 0.0);
        assert!((gap - excess).abs() <= 1e-6 * (1.0 + excess), "{gap} vs {excess}");
        let mu = sol.psi.clone().symmetric_eigen().eigenvalues.min()
            * sol.sigma_e.clone().symmetric_eigen().eigenvalues.min();
        assert!(excess >= mu * h2_norm_sq(&y.q).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn composition_agrees_with_innovation_form() {
        let plant = generic();
        let sol = synthesize(&plant).unwrap();
        let fac = coprime_factorization(&plant, &sol);
        for (alpha, beta) in [(0.8, 1.0), (1.0, 0.7), (1.1, 1.2)] {
            let k = detuned_controller(&plant, &sol, alpha, beta);
            let q = youla_parameter(&k, &fac, &plant).unwrap().q;
            let qc = youla_parameter_composed(&k, &fac, &plant).unwrap().q;
            let diff = hinf_norm(&q.sub(&qc).unwrap(), 1e-9).unwrap();
            // Composition loses digits in the cancellation of plant modes.
            assert!(diff <= 1e-4 * (1.0 + hinf_norm(&q, 1e-9).unwrap()), "{diff}");
            assert!(reconstruction_error(&q, &fac, &k, 256).unwrap() <= 1e-7);
            let gap = evaluate_cost(&plant, &k).unwrap() - sol.j_star;
            let excess = excess_via_youla(&q, &sol).unwrap();
            assert!((gap - excess).abs() <= 1e-6 * (1.0 + excess), "{gap} vs {excess}");
        }
    }

    #[test]
    fn check_summary_for_optimal_controller() {
        let plant = doyle(0.25);
        let sol = synthesize(&plant).unwrap();
        let c = youla_check(&plant, &sol, &lqg_controller(&sol, &plant), 128).unwrap();
        assert!(c.q_hinf <= 1e-8 && c.cost_gap.abs() <= 1e-8 * sol.j_star && c.excess_residual <= 1e-8);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn unstable_controller_is_rejected() {
        let plant = doyle(0.25);
        let sol = synthesize(&plant).unwrap();
        let fac = coprime_factorization(&plant, &sol);
        let k = LinearController::static_gain(scalar(0.0));
        assert!(matches!(youla_parameter(&k, &fac, &plant), Err(Error::NotStabilizing(_))));
    }
}
