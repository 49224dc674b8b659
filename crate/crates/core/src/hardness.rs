//! Excess-cost Hessian, Fisher information of exploration policies, and the
//! resulting local minimax lower bound.

use serde::Serialize;

use crate::config::Tolerances;
use crate::derivatives::{gain_derivatives, GainDerivatives};
use crate::error::{Error, Result};
use crate::family::{ParametricFamily, PlantDerivative};
use crate::lqg::{synthesize, LinearController, LqgSolution, PlantInstance};
use crate::matsolve::dense::{
    blkdiag, block, eye, hstack, inverse, spectral_radius, symmetrize, to_rows, vstack, zeros, Mat,
};
use crate::matsolve::{solve_dlyap, StateSpaceTF};

/// Linear exploration policy with additive probing noise `eta ~ N(0, I)`:
/// `x_e+ = A_e x_e + B_e y + B_e^eta eta`, `u = C_e x_e + D_y y + D_eta eta`.
///
/// `B_e^eta` lets the policy state see its own probing input; it is zero for
/// policies that only observe `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationPolicy {
    pub a_exp: Mat,
    pub b_exp: Mat,
    pub c_exp: Mat,
    pub d_y: Mat,
    pub d_eta: Mat,
    pub b_exp_eta: Mat,
    pub kind: PolicyKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Optimal LQG controller whose observer includes the applied probing input.
    OptimalLqg { eta: f64 },
    StaticGain,
    Custom,
}

impl ExplorationPolicy {
    /// The optimal strictly causal controller with probing `D_eta = eta I`.
    pub fn optimal_lqg(plant: &PlantInstance, sol: &LqgSolution, eta: f64) -> Self {
        let d_eta = eye(plant.du()) * eta;
        Self {
            a_exp: &sol.a_cl_o + &plant.b * &sol.f,
            b_exp: sol.l.clone(),
            c_exp: sol.f.clone(),
            d_y: zeros(plant.du(), plant.dy()),
            b_exp_eta: &plant.b * &d_eta,
            d_eta,
            kind: PolicyKind::OptimalLqg { eta },
        }
    }

    /// Static output feedback `u = F y + D_eta eta`.
    pub fn static_gain(f: Mat, d_eta: Mat) -> Self {
        let (du, dy) = f.shape();
        let m = d_eta.ncols();
        Self {
            a_exp: zeros(0, 0),
            b_exp: zeros(0, dy),
            c_exp: zeros(du, 0),
            d_y: f,
            d_eta,
            b_exp_eta: zeros(0, m),
            kind: PolicyKind::StaticGain,
        }
    }

    /// Arbitrary controller `u = K y + D_eta eta`; the controller state does not
    /// see `eta`.
    pub fn custom(k: &StateSpaceTF, d_eta: Mat) -> Self {
        let m = d_eta.ncols();
        Self {
            a_exp: k.a.clone(),
            b_exp: k.b.clone(),
            c_exp: k.c.clone(),
            d_y: k.d.clone(),
            b_exp_eta: zeros(k.order(), m),
            d_eta,
            kind: PolicyKind::Custom,
        }
    }

    pub fn controller(&self) -> LinearController {
        LinearController::new(StateSpaceTF {
            a: self.a_exp.clone(),
            b: self.b_exp.clone(),
            c: self.c_exp.clone(),
            d: self.d_y.clone(),
        })
    }

    pub fn order(&self) -> usize {
        self.a_exp.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.d_eta.ncols()
    }

    pub(crate) fn check(&self, plant: &PlantInstance) -> Result<()> {
        let (k, m) = (self.order(), self.noise_dim());
        let (du, dy) = (plant.du(), plant.dy());
        let ok = self.a_exp.shape() == (k, k)
            && self.b_exp.shape() == (k, dy)
            && self.c_exp.shape() == (du, k)
            && self.d_y.shape() == (du, dy)
            && self.d_eta.nrows() == du
            && self.b_exp_eta.shape() == (k, m);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("exploration policy does not match the plant".into()))
        }
    }
}

/// Exploration policy description resolved against the plant at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Optimal { eta: f64 },
    /// Static gain equal to the optimal LQR gain (fully observed plants).
    StaticOptimal { eta: f64 },
    Static { f: Mat, eta: f64 },
    Custom { k: StateSpaceTF, eta: f64 },
}

impl PolicySpec {
    pub fn resolve(&self, plant: &PlantInstance, sol: &LqgSolution) -> Result<ExplorationPolicy> {
        let probing = |eta: f64| eye(plant.du()) * eta;
        let policy = match self {
            PolicySpec::Optimal { eta } => ExplorationPolicy::optimal_lqg(plant, sol, *eta),
            PolicySpec::StaticOptimal { eta } => {
                if plant.dy() != plant.n() {
                    return Err(Error::InvalidParameter("static LQR policy needs C square".into()));
                }
                let f = &sol.f * inverse(&plant.c, "C")?;
                ExplorationPolicy::static_gain(f, probing(*eta))
            }
            PolicySpec::Static { f, eta } => ExplorationPolicy::static_gain(f.clone(), probing(*eta)),
            PolicySpec::Custom { k, eta } => ExplorationPolicy::custom(k, probing(*eta)),
        };
        policy.check(plant)?;
        Ok(policy)
    }
}

/// Which excess-cost Hessian characterization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianKind {
    Strict,
    Causal,
    Lqr,
}

/// Plant and LQG solution at a parameter value, shared across directions.
#[derive(Debug, Clone)]
pub struct Nominal {
    pub theta: Vec<f64>,
    pub plant: PlantInstance,
    pub sol: LqgSolution,
}

impl Nominal {
    pub fn new(family: &dyn ParametricFamily, theta: &[f64]) -> Result<Self> {
        let plant = family.eval(theta)?;
        let sol = synthesize(&plant)?;
        Ok(Self { theta: theta.to_vec(), plant, sol })
    }

    pub fn direction(&self, family: &dyn ParametricFamily, v: &[f64]) -> Result<(PlantDerivative, GainDerivatives)> {
        let d = family.derivative(&self.theta, v)?;
        let g = gain_derivatives(&self.plant, &self.sol, &d)?;
        Ok((d, g))
    }
}

/// Joint linear system `xi+ = A xi + B noise` with noise covariance `W`.
#[derive(Debug, Clone)]
pub struct JointSystem {
    pub a: Mat,
    pub b: Mat,
    pub w: Mat,
}

impl JointSystem {
    pub fn stationary_covariance(&self) -> Result<Mat> {
        solve_dlyap(&self.a, &symmetrize(&(&self.b * &self.w * self.b.transpose())))
    }
}

/// State `(x_hat, r_dot)` of the strictly causal Hessian characterization.
pub fn strict_hessian_system(nom: &Nominal, d: &PlantDerivative, g: &GainDerivatives) -> JointSystem {
    let s = &nom.sol;
    let lower = &d.a - &s.l * &d.c + &d.b * &s.f;
    JointSystem {
        a: block(&[&[Some(&s.a_cl_c), None], &[Some(&lower), Some(&s.a_cl_o)]]),
        b: vstack(&s.l, &g.l_dot),
        w: s.sigma_e.clone(),
    }
}

/// State `(x_filtered, r_dot)` of the causal Hessian characterization.
pub fn causal_hessian_system(nom: &Nominal, d: &PlantDerivative, g: &GainDerivatives) -> Result<JointSystem> {
    let (p, s) = (&nom.plant, &nom.sol);
    let l_bar = s.l_bar(p)?;
    let i_lc = eye(p.n()) - &l_bar * &p.c;
    let lower = &i_lc * (&d.a + &d.b * &s.f) - &l_bar * &d.c * &s.a_cl_c;
    Ok(JointSystem {
        a: block(&[&[Some(&s.a_cl_c), None], &[Some(&lower), Some(&(&i_lc * &p.a))]]),
        b: vstack(&l_bar, &g.l_bar_dot),
        w: s.sigma_e.clone(),
    })
}

fn is_zero(m: &Mat) -> bool {
    m.iter().all(|&x| x == 0.0)
}

/// Hessian quadratic form `q(v)` from precomputed derivatives.
pub fn hessian_form_at(kind: HessianKind, nom: &Nominal, d: &PlantDerivative, g: &GainDerivatives) -> Result<f64> {
    if d.is_zero() {
        return Ok(0.0);
    }
    let s = &nom.sol;
    match kind {
        HessianKind::Lqr => {
            if is_zero(&g.f_dot) {
                return Ok(0.0);
            }
            let x = solve_dlyap(&s.a_cl_c, &nom.plant.sigma_w)?;
            Ok(2.0 * (&s.psi * &g.f_dot * x * g.f_dot.transpose()).trace())
        }
        HessianKind::Strict | HessianKind::Causal => {
            let sys = if kind == HessianKind::Strict {
                strict_hessian_system(nom, d, g)
            } else {
                causal_hessian_system(nom, d, g)?
            };
            let sigma_h = sys.stationary_covariance()?;
            let m = hstack(&g.f_dot, &s.f);
            Ok(2.0 * (&s.psi * &m * sigma_h * m.transpose()).trace())
        }
    }
}

pub fn hessian_form(kind: HessianKind, family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<f64> {
    let nom = Nominal::new(family, theta)?;
    let (d, g) = nom.direction(family, v)?;
    hessian_form_at(kind, &nom, &d, &g)
}

pub fn hessian_form_strict(family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<f64> {
    hessian_form(HessianKind::Strict, family, theta, v)
}

pub fn hessian_form_causal(family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<f64> {
    hessian_form(HessianKind::Causal, family, theta, v)
}

pub fn hessian_lqr(family: &dyn ParametricFamily, theta: &[f64], v: &[f64]) -> Result<f64> {
    hessian_form(HessianKind::Lqr, family, theta, v)
}

/// Symmetric matrix of a quadratic form by polarization,
/// `M_ij = (q(e_i + e_j) - q(e_i) - q(e_j)) / 2`.
pub fn polarize(dim: usize, q: impl Fn(&[f64]) -> Result<f64>) -> Result<Mat> {
    let unit = |i: usize| {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        e
    };
    let diag: Vec<f64> = (0..dim).map(|i| q(&unit(i))).collect::<Result<_>>()?;
    let mut m = Mat::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut e = unit(i);
            e[j] = 1.0;
            let v = 0.5 * (q(&e)? - diag[i] - diag[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

pub fn hessian_matrix(kind: HessianKind, family: &dyn ParametricFamily, theta: &[f64]) -> Result<Mat> {
    let nom = Nominal::new(family, theta)?;
    hessian_matrix_at(kind, family, &nom)
}

fn hessian_matrix_at(kind: HessianKind, family: &dyn ParametricFamily, nom: &Nominal) -> Result<Mat> {
    polarize(family.dim(), |v| {
        let (d, g) = nom.direction(family, v)?;
        hessian_form_at(kind, nom, &d, &g)
    })
}

/// Joint state `(x_hat, x_exp, r_dot)` driven by `(e, eta)`.
pub fn fisher_system(
    nom: &Nominal,
    policy: &ExplorationPolicy,
    d: &PlantDerivative,
    g: &GainDerivatives,
) -> Result<(JointSystem, Mat)> {
    let (p, s) = (&nom.plant, &nom.sol);
    policy.check(p)?;
    let (n, k, m) = (p.n(), policy.order(), policy.noise_dim());
    let bdy = &p.b * &policy.d_y;
    let a = assemble(
        &[n, k, n],
        &[
            &[Some(&p.a + &bdy * &p.c), Some(&p.b * &policy.c_exp), None],
            &[Some(&policy.b_exp * &p.c), Some(policy.a_exp.clone()), None],
            &[
                Some(&d.a - &s.l * &d.c + &d.b * &policy.d_y * &p.c),
                Some(&d.b * &policy.c_exp),
                Some(s.a_cl_o.clone()),
            ],
        ],
        &[n, k, n],
    );
    let b = assemble(
        &[n, k, n],
        &[
            &[Some(&s.l + &bdy), Some(&p.b * &policy.d_eta)],
            &[Some(policy.b_exp.clone()), Some(policy.b_exp_eta.clone())],
            &[Some(&g.l_dot + &d.b * &policy.d_y), Some(&d.b * &policy.d_eta)],
        ],
        &[p.dy(), m],
    );
    let rho = spectral_radius(&a.view((0, 0), (n + k, n + k)).into_owned());
    if !(rho < 1.0 - Tolerances::default().stability_margin) {
        return Err(Error::ExplorationUnstable(rho));
    }
    let output = hstack(&hstack(&d.c, &zeros(p.dy(), k)), &p.c);
    Ok((JointSystem { a, b, w: blkdiag(&s.sigma_e, &eye(m)) }, output))
}

/// Block matrix with explicit block sizes (empty blocks are allowed).
fn assemble(rows: &[usize], blocks: &[&[Option<Mat>]], cols: &[usize]) -> Mat {
    let mut out = zeros(rows.iter().sum(), cols.iter().sum());
    let mut r0 = 0;
    for (i, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            if let Some(b) = b {
                assert_eq!(b.shape(), (rows[i], cols[j]), "block ({i}, {j})");
                out.view_mut((r0, c0), (rows[i], cols[j])).copy_from(b);
            }
            c0 += cols[j];
        }
        r0 += rows[i];
    }
    out
}

/// `1/2 tr((Sigma_e^{-1} Sigma_e_dot)^2)`
fn logdet_term(sol: &LqgSolution, g: &GainDerivatives) -> Result<f64> {
    let x = inverse(&sol.sigma_e, "Sigma_e")? * &g.sigma_e_dot;
    Ok(0.5 * (&x * &x).trace())
}

fn quad_term(sol: &LqgSolution, out: &Mat, cov: &Mat) -> Result<f64> {
    Ok((inverse(&sol.sigma_e, "Sigma_e")? * out * cov * out.transpose()).trace())
}

pub fn fisher_rate_at(
    nom: &Nominal,
    policy: &ExplorationPolicy,
    d: &PlantDerivative,
    g: &GainDerivatives,
) -> Result<f64> {
    let (sys, out) = fisher_system(nom, policy, d, g)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    let cov = sys.stationary_covariance()?;
    Ok(quad_term(&nom.sol, &out, &cov)? + logdet_term(&nom.sol, g)?)
}

/// Asymptotic Fisher information rate `lim FI_T / T` along `v`.
pub fn fisher_rate(
    family: &dyn ParametricFamily,
    theta: &[f64],
    policy: &PolicySpec,
    v: &[f64],
) -> Result<f64> {
    let nom = Nominal::new(family, theta)?;
    let pol = policy.resolve(&nom.plant, &nom.sol)?;
    let (d, g) = nom.direction(family, v)?;
    fisher_rate_at(&nom, &pol, &d, &g)
}

/// Fisher rate under the optimal policy with probing `eta I`, from the reduced
/// `2n` joint state `(x_hat, r_dot)`.
pub fn fisher_rate_optimal_policy(family: &dyn ParametricFamily, theta: &[f64], eta: f64, v: &[f64]) -> Result<f64> {
    let nom = Nominal::new(family, theta)?;
    let (d, g) = nom.direction(family, v)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    let (p, s) = (&nom.plant, &nom.sol);
    let d_eta = eye(p.du()) * eta;
    let lower = &d.a - &s.l * &d.c + &d.b * &s.f;
    let sys = JointSystem {
        a: block(&[&[Some(&s.a_cl_c), None], &[Some(&lower), Some(&s.a_cl_o)]]),
        b: block(&[&[Some(&s.l), Some(&(&p.b * &d_eta))], &[Some(&g.l_dot), Some(&(&d.b * &d_eta))]]),
        w: blkdiag(&s.sigma_e, &eye(p.du())),
    };
    let cov = sys.stationary_covariance()?;
    let out = hstack(&d.c, &p.c);
    Ok(quad_term(s, &out, &cov)? + logdet_term(s, &g)?)
}

pub fn fisher_finite_t_at(
    nom: &Nominal,
    policy: &ExplorationPolicy,
    d: &PlantDerivative,
    g: &GainDerivatives,
    t: usize,
) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("horizon T must be at least 1".into()));
    }
    let (sys, out) = fisher_system(nom, policy, d, g)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    let se_inv = inverse(&nom.sol.sigma_e, "Sigma_e")?;
    let m = &se_inv * &out;
    let q = symmetrize(&(&sys.b * &sys.w * sys.b.transpose()));
    let dim = sys.a.nrows();
    let mut cov = zeros(dim, dim);
    let mut total = 0.0;
    for _ in 0..t {
        total += (&m * &cov * out.transpose()).trace();
        cov = &sys.a * &cov * sys.a.transpose() + &q;
    }
    Ok(total + t as f64 * logdet_term(&nom.sol, g)?)
}

/// Exact Fisher information of one trajectory of length `T`, starting from
/// the stationary predictor initialization.
pub fn fisher_finite_t(
    family: &dyn ParametricFamily,
    theta: &[f64],
    policy: &PolicySpec,
    v: &[f64],
    t: usize,
) -> Result<f64> {
    let nom = Nominal::new(family, theta)?;
    let pol = policy.resolve(&nom.plant, &nom.sol)?;
    let (d, g) = nom.direction(family, v)?;
    fisher_finite_t_at(&nom, &pol, &d, &g, t)
}

/// Fully observed Fisher rate under `u = F x` with no probing:
/// `tr((A_dot + B_dot F) dlyap(A + B F, Sigma_w) (A_dot + B_dot F)^T Sigma_w^{-1})`.
pub fn fisher_lqr_static(family: &dyn ParametricFamily, theta: &[f64], f: &Mat, v: &[f64]) -> Result<f64> {
    let plant = family.eval(theta)?;
    let d = family.derivative(theta, v)?;
    let acl = &plant.a + &plant.b * f;
    let rho = spectral_radius(&acl);
    if !(rho < 1.0 - Tolerances::default().stability_margin) {
        return Err(Error::Unstable(rho));
    }
    let delta = &d.a + &d.b * f;
    if is_zero(&delta) {
        return Ok(0.0);
    }
    let x = solve_dlyap(&acl, &plant.sigma_w)?;
    Ok((&delta * x * delta.transpose() * inverse(&plant.sigma_w, "Sigma_w")?).trace())
}

pub fn fisher_matrix(family: &dyn ParametricFamily, theta: &[f64], policy: &PolicySpec) -> Result<Mat> {
    let nom = Nominal::new(family, theta)?;
    let pol = policy.resolve(&nom.plant, &nom.sol)?;
    polarize(family.dim(), |v| {
        let (d, g) = nom.direction(family, v)?;
        fisher_rate_at(&nom, &pol, &d, &g)
    })
}

pub fn fisher_matrix_finite_t(
    family: &dyn ParametricFamily,
    theta: &[f64],
    policy: &PolicySpec,
    t: usize,
) -> Result<Mat> {
    let nom = Nominal::new(family, theta)?;
    let pol = policy.resolve(&nom.plant, &nom.sol)?;
    polarize(family.dim(), |v| {
        let (d, g) = nom.direction(family, v)?;
        fisher_finite_t_at(&nom, &pol, &d, &g, t)
    })
}

/// Inverse of a symmetric positive definite Fisher matrix via its eigen-
/// decomposition. Returns the inverse and the condition number.
pub fn invert_fisher(fi: &Mat, tol: &Tolerances) -> Result<(Mat, f64)> {
    let eig = symmetrize(fi).symmetric_eigen();
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(min > tol.fisher_rel * max) || !(min > tol.fisher_abs) {
        return Err(Error::SingularFisher { min, max });
    }
    let inv_d = eig.eigenvalues.map(|l| 1.0 / l);
    let inv = &eig.eigenvectors * Mat::from_diagonal(&inv_d) * eig.eigenvectors.transpose();
    Ok((symmetrize(&inv), max / min))
}

/// `tr(H FI^{-1})`
pub fn trace_h_fi_inv(h: &Mat, fi: &Mat) -> Result<f64> {
    let (inv, _) = invert_fisher(fi, &Tolerances::default())?;
    Ok((h * inv).trace())
}

#[derive(Debug, Clone)]
pub struct HardnessReport {
    pub h: Mat,
    pub fi_rate: Mat,
    pub fi_finite_t: Option<Mat>,
    pub t: usize,
    pub n: usize,
    pub bound: f64,
    pub ce_asymptote: f64,
    pub j_star: f64,
    pub hessian_kind: HessianKind,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct HardnessReportJson<'a> {
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "FI_rate")]
    fi_rate: Vec<Vec<f64>>,
    #[serde(rename = "FI_finite_T")]
    fi_finite_t: Option<Vec<Vec<f64>>>,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "N")]
    n: usize,
    bound: f64,
    ce_asymptote: f64,
    #[serde(rename = "J_star")]
    j_star: f64,
    hessian_kind: HessianKind,
    warnings: &'a [String],
}

impl Serialize for HardnessReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HardnessReportJson {
            h: to_rows(&self.h),
            fi_rate: to_rows(&self.fi_rate),
            fi_finite_t: self.fi_finite_t.as_ref().map(to_rows),
            t: self.t,
            n: self.n,
            bound: self.bound,
            ce_asymptote: self.ce_asymptote,
            j_star: self.j_star,
            hessian_kind: self.hessian_kind,
            warnings: &self.warnings,
        }
        .serialize(s)
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub n: usize,
    pub t: usize,
    pub use_finite_t: bool,
    pub hessian_kind: HessianKind,
}

/// Lower bound `tr(H FI^{-1}) / (4 N)` with `FI` the finite-horizon matrix if
/// requested, otherwise `T` times the asymptotic rate.
pub fn hardness_report(
    family: &dyn ParametricFamily,
    theta: &[f64],
    policy: &PolicySpec,
    opts: &ReportOptions,
) -> Result<HardnessReport> {
    if opts.n == 0 || opts.t == 0 {
        return Err(Error::InvalidParameter("N and T must be positive".into()));
    }
    if family.dim() == 0 {
        return Err(Error::InvalidParameter("family has no parameters".into()));
    }
    let tol = Tolerances::default();
    let nom = Nominal::new(family, theta)?;
    let pol = policy.resolve(&nom.plant, &nom.sol)?;
    let h = hessian_matrix_at(opts.hessian_kind, family, &nom)?;
    let fi_rate = polarize(family.dim(), |v| {
        let (d, g) = nom.direction(family, v)?;
        fisher_rate_at(&nom, &pol, &d, &g)
    })?;
    let fi_finite_t = if opts.use_finite_t {
        Some(polarize(family.dim(), |v| {
            let (d, g) = nom.direction(family, v)?;
            fisher_finite_t_at(&nom, &pol, &d, &g, opts.t)
        })?)
    } else {
        None
    };
    let fi = fi_finite_t.clone().unwrap_or_else(|| &fi_rate * opts.t as f64);
    let (fi_inv, cond) = invert_fisher(&fi, &tol)?;
    let mut warnings = Vec::new();
    if cond > tol.fisher_condition_warning {
        warnings.push(format!("Fisher information is ill-conditioned (condition number {cond:.3e})"));
    }
    let h_min = h.clone().symmetric_eigen().eigenvalues.min();
    if h_min < -1e-9 * h.trace().abs() {
        warnings.push(format!("Hessian has a negative eigenvalue {h_min:.3e}"));
    }
    let bound = (&h * fi_inv).trace() / (4.0 * opts.n as f64);
    Ok(HardnessReport {
        h,
        fi_rate,
        fi_finite_t,
        t: opts.t,
        n: opts.n,
        bound,
        ce_asymptote: 2.0 * bound,
        j_star: nom.sol.j_star,
        hessian_kind: opts.hessian_kind,
        warnings,
    })
}
