//! LQG synthesis, cost evaluation of linear controllers, and the closed-loop
//! map of a plant/controller interconnection.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matsolve::dense::{
    blkdiag, block, check_finite, hstack, check_symmetric, eye, from_rows, inverse, min_eigenvalue, psd_sqrt,
    spectral_radius, symmetrize, to_rows, zeros, Mat,
};
use crate::matsolve::{is_detectable, is_stabilizable, solve_dare_with, solve_dlyap, StateSpaceTF};

/// Partially observed plant
/// `x+ = A x + B u + w`, `y = C x + v` with cost weights `Q`, `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantInstance {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub sigma_w: Mat,
    pub sigma_v: Mat,
    pub q: Mat,
    pub r: Mat,
}

impl PlantInstance {
    /// Validates dimensions, symmetry, definiteness and the stabilizability and
    /// detectability assumptions.
    pub fn new(a: Mat, b: Mat, c: Mat, sigma_w: Mat, sigma_v: Mat, q: Mat, r: Mat) -> Result<Self> {
        let plant = Self { a, b, c, sigma_w, sigma_v, q, r };
        plant.validate()?;
        Ok(plant)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn du(&self) -> usize {
        self.b.ncols()
    }

    pub fn dy(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let tol = Tolerances::default();
        let (n, du, dy) = (self.a.nrows(), self.b.ncols(), self.c.nrows());
        let shapes = [
            ("A", &self.a, (n, n)),
            ("B", &self.b, (n, du)),
            ("C", &self.c, (dy, n)),
            ("Sigma_w", &self.sigma_w, (n, n)),
            ("Sigma_v", &self.sigma_v, (dy, dy)),
            ("Q", &self.q, (n, n)),
            ("R", &self.r, (du, du)),
        ];
        for (name, m, shape) in shapes {
            if m.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} must be {}x{}, got {}x{}",
                    shape.0,
                    shape.1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            check_finite(m, name_static(name))?;
        }
        for (name, m) in [("Sigma_w", &self.sigma_w), ("Sigma_v", &self.sigma_v), ("Q", &self.q), ("R", &self.r)] {
            check_symmetric(m, name_static(name), tol.symmetry)?;
        }
        for (name, m) in [("Sigma_w", &self.sigma_w), ("Q", &self.q)] {
            if n > 0 && min_eigenvalue(m) < -tol.symmetry * (1.0 + m.amax()) {
                return Err(Error::NotPositiveDefinite(name_static(name)));
            }
        }
        if dy > 0 && min_eigenvalue(&self.sigma_v) <= 0.0 {
            return Err(Error::NotPositiveDefinite("Sigma_v"));
        }
        if du > 0 && min_eigenvalue(&self.r) <= 0.0 {
            return Err(Error::NotPositiveDefinite("R"));
        }
        if !is_stabilizable(&self.a, &self.b, tol.pbh_rank) {
            return Err(Error::NonStabilizable("A, B"));
        }
        if !is_detectable(&self.a, &self.c, tol.pbh_rank) {
            return Err(Error::NonDetectable("A, C"));
        }
        if !is_detectable(&self.a.transpose(), &psd_sqrt(&self.sigma_w), tol.pbh_rank) {
            return Err(Error::NonDetectable("A^T, Sigma_w^1/2"));
        }
        if !is_detectable(&self.a, &psd_sqrt(&self.q), tol.pbh_rank) {
            return Err(Error::NonDetectable("A, Q^1/2"));
        }
        Ok(())
    }

    /// Transfer from `u` to `y`.
    pub fn transfer_u(&self) -> StateSpaceTF {
        StateSpaceTF {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: zeros(self.dy(), self.du()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PlantJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_plant()
    }

    pub fn to_json(&self) -> PlantJson {
        PlantJson {
            a: to_rows(&self.a),
            b: to_rows(&self.b),
            c: to_rows(&self.c),
            sigma_w: to_rows(&self.sigma_w),
            sigma_v: to_rows(&self.sigma_v),
            q: to_rows(&self.q),
            r: to_rows(&self.r),
        }
    }
}

fn name_static(name: &str) -> &'static str {
    match name {
        "A" => "A",
        "B" => "B",
        "C" => "C",
        "Sigma_w" => "Sigma_w",
        "Sigma_v" => "Sigma_v",
        "Q" => "Q",
        _ => "R",
    }
}

/// Row-major JSON form of a [`PlantInstance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Sigma_w")]
    pub sigma_w: Vec<Vec<f64>>,
    #[serde(rename = "Sigma_v")]
    pub sigma_v: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

impl PlantJson {
    pub fn into_plant(self) -> Result<PlantInstance> {
        PlantInstance::new(
            from_rows(&self.a, "A")?,
            from_rows(&self.b, "B")?,
            from_rows(&self.c, "C")?,
            from_rows(&self.sigma_w, "Sigma_w")?,
            from_rows(&self.sigma_v, "Sigma_v")?,
            from_rows(&self.q, "Q")?,
            from_rows(&self.r, "R")?,
        )
    }
}

#[derive(Debug, Clone)]
pub struct LqgSolution {
    /// Control Riccati solution.
    pub p: Mat,
    /// Filter Riccati solution (one-step prediction error covariance).
    pub sigma: Mat,
    /// LQR gain, `u = F x`.
    pub f: Mat,
    /// Kalman predictor gain.
    pub l: Mat,
    pub psi: Mat,
    pub sigma_e: Mat,
    pub a_cl_c: Mat,
    pub a_cl_o: Mat,
    pub j_star: f64,
    pub control_residual: f64,
    pub filter_residual: f64,
}

impl LqgSolution {
    /// Filter gain `Sigma C^T Sigma_e^{-1}` of the current-state estimate.
    pub fn l_bar(&self, plant: &PlantInstance) -> Result<Mat> {
        Ok(&self.sigma * plant.c.transpose() * inverse(&self.sigma_e, "Sigma_e")?)
    }
}

pub fn synthesize(plant: &PlantInstance) -> Result<LqgSolution> {
    let tol = Tolerances::default();
    let ctrl = solve_dare_with(&plant.a, &plant.b, &plant.q, &plant.r, &tol)?;
    let filt = solve_dare_with(
        &plant.a.transpose(),
        &plant.c.transpose(),
        &plant.sigma_w,
        &plant.sigma_v,
        &tol,
    )?;
    let (p, sigma) = (ctrl.p, filt.p);
    let psi = symmetrize(&(plant.b.transpose() * &p * &plant.b + &plant.r));
    let f = -crate::matsolve::dense::solve(&psi, &(plant.b.transpose() * &p * &plant.a), "Psi")?;
    let sigma_e = symmetrize(&(&plant.c * &sigma * plant.c.transpose() + &plant.sigma_v));
    let l = &plant.a * &sigma * plant.c.transpose() * inverse(&sigma_e, "Sigma_e")?;
    let a_cl_c = &plant.a + &plant.b * &f;
    let a_cl_o = &plant.a - &l * &plant.c;
    for (m, _) in [(&a_cl_c, "control"), (&a_cl_o, "observer")] {
        let rho = spectral_radius(m);
        if !(rho < 1.0) {
            return Err(Error::ClosedLoopUnstable(rho));
        }
    }
    let mut sol = LqgSolution {
        p,
        sigma,
        f,
        l,
        psi,
        sigma_e,
        a_cl_c,
        a_cl_o,
        j_star: f64::NAN,
        control_residual: ctrl.residual,
        filter_residual: filt.residual,
    };
    sol.j_star = evaluate_cost(plant, &lqg_controller(&sol, plant))?;
    Ok(sol)
}

/// `tr(P Sigma_w) + tr(Psi F Sigma F^T)`
pub fn optimal_cost_formula(plant: &PlantInstance, sol: &LqgSolution) -> f64 {
    (&sol.p * &plant.sigma_w).trace() + (&sol.psi * &sol.f * &sol.sigma * sol.f.transpose()).trace()
}

/// Output feedback law `u = K y` (positive feedback convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StateSpaceTF", into = "StateSpaceTF")]
pub struct LinearController {
    pub realization: StateSpaceTF,
    pub strictly_proper: bool,
}

impl From<StateSpaceTF> for LinearController {
    fn from(realization: StateSpaceTF) -> Self {
        Self::new(realization)
    }
}

impl From<LinearController> for StateSpaceTF {
    fn from(k: LinearController) -> Self {
        k.realization
    }
}

impl LinearController {
    pub fn new(realization: StateSpaceTF) -> Self {
        let strictly_proper = realization.is_strictly_proper();
        Self { realization, strictly_proper }
    }

    pub fn static_gain(d: Mat) -> Self {
        Self::new(StateSpaceTF::static_gain(d))
    }

    fn check_dims(&self, plant: &PlantInstance) -> Result<()> {
        let k = &self.realization;
        if k.inputs() != plant.dy() || k.outputs() != plant.du() {
            return Err(Error::Dimension(format!(
                "controller is {}x{}, plant needs {}x{}",
                k.outputs(),
                k.inputs(),
                plant.du(),
                plant.dy()
            )));
        }
        Ok(())
    }
}

/// Strictly causal optimal controller `(A - LC + BF, L, F, 0)`.
pub fn lqg_controller(sol: &LqgSolution, plant: &PlantInstance) -> LinearController {
    LinearController::new(StateSpaceTF {
        a: &sol.a_cl_o + &plant.b * &sol.f,
        b: sol.l.clone(),
        c: sol.f.clone(),
        d: zeros(plant.du(), plant.dy()),
    })
}

/// Causal controller `u_t = F x_{t|t}` built on the filtered estimate.
pub fn causal_lqg_controller(sol: &LqgSolution, plant: &PlantInstance) -> Result<LinearController> {
    let l_bar = sol.l_bar(plant)?;
    let i_lc = eye(plant.n()) - &l_bar * &plant.c;
    Ok(LinearController::new(StateSpaceTF {
        a: &sol.a_cl_c * &i_lc,
        b: &sol.a_cl_c * &l_bar,
        c: &sol.f * &i_lc,
        d: &sol.f * &l_bar,
    }))
}

/// Stationary closed loop of plant and controller, state `(x, x_K)`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: Mat,
    /// Noise input matrix for `(w, v)`.
    pub g: Mat,
    /// Joint stationary covariance.
    pub sigma: Mat,
    pub sigma_x: Mat,
    pub sigma_u: Mat,
}

pub fn closed_loop(plant: &PlantInstance, k: &LinearController) -> Result<ClosedLoop> {
    k.check_dims(plant)?;
    let kr = &k.realization;
    let n = plant.n();
    let bdk = &plant.b * &kr.d;
    let a = block(&[
        &[Some(&(&plant.a + &bdk * &plant.c)), Some(&(&plant.b * &kr.c))],
        &[Some(&(&kr.b * &plant.c)), Some(&kr.a)],
    ]);
    let rho = spectral_radius(&a);
    if !(rho < 1.0 - Tolerances::default().stability_margin) {
        return Err(Error::ClosedLoopUnstable(rho));
    }
    let g = block(&[&[Some(&eye(n)), Some(&bdk)], &[None, Some(&kr.b)]]);
    let w = blkdiag(&plant.sigma_w, &plant.sigma_v);
    let sigma = solve_dlyap(&a, &symmetrize(&(&g * w * g.transpose())))?;
    let sigma_x = sigma.view((0, 0), (n, n)).into_owned();
    let m = hstack(&(&kr.d * &plant.c), &kr.c);
    let sigma_u = symmetrize(&(&m * &sigma * m.transpose() + &kr.d * &plant.sigma_v * kr.d.transpose()));
    Ok(ClosedLoop { a, g, sigma, sigma_x, sigma_u })
}

/// Stationary LQG cost `tr(Q Sigma_x) + tr(R Sigma_u)` of a controller.
pub fn evaluate_cost(plant: &PlantInstance, k: &LinearController) -> Result<f64> {
    let cl = closed_loop(plant, k)?;
    Ok((&plant.q * &cl.sigma_x).trace() + (&plant.r * &cl.sigma_u).trace())
}

/// Realization of the 2x2 block closed-loop map from `(r1, r2)` to `(u, y)`
/// with `u = r1 + K y`, `y = r2 + P u`.
pub fn closed_loop_map_tk(plant: &PlantInstance, k: &LinearController) -> Result<StateSpaceTF> {
    k.check_dims(plant)?;
    let kr = &k.realization;
    let (n, du, dy, nk) = (plant.n(), plant.du(), plant.dy(), kr.order());
    // The plant is strictly proper, so I - D_K D_P = I is always invertible.
    let bdk = &plant.b * &kr.d;
    let mut a = zeros(n + nk, n + nk);
    a.view_mut((0, 0), (n, n)).copy_from(&(&plant.a + &bdk * &plant.c));
    a.view_mut((0, n), (n, nk)).copy_from(&(&plant.b * &kr.c));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&kr.b * &plant.c));
    a.view_mut((n, n), (nk, nk)).copy_from(&kr.a);
    let mut b = zeros(n + nk, du + dy);
    b.view_mut((0, 0), (n, du)).copy_from(&plant.b);
    b.view_mut((0, du), (n, dy)).copy_from(&bdk);
    b.view_mut((n, du), (nk, dy)).copy_from(&kr.b);
    let mut c = zeros(du + dy, n + nk);
    c.view_mut((0, 0), (du, n)).copy_from(&(&kr.d * &plant.c));
    c.view_mut((0, n), (du, nk)).copy_from(&kr.c);
    c.view_mut((du, 0), (dy, n)).copy_from(&plant.c);
    let mut d = eye(du + dy);
    d.view_mut((0, du), (du, dy)).copy_from(&kr.d);
    let rho = spectral_radius(&a);
    if !(rho < 1.0 - Tolerances::default().stability_margin) {
        return Err(Error::ClosedLoopUnstable(rho));
    }
    StateSpaceTF::new(a, b, c, d)
}
