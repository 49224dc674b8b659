//! Exploration rollouts, the Gaussian negative log-likelihood, scalar maximum
//! likelihood, and Monte Carlo checks of the certainty-equivalence pipeline.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::ParametricFamily;
use crate::hardness::{ExplorationPolicy, PolicySpec};
use crate::lqg::{evaluate_cost, lqg_controller, synthesize, LqgSolution, PlantInstance};
use crate::matsolve::dense::{block, psd_sqrt, spectral_radius, Mat};
use crate::optimize::brent;

/// Row-major copy of a small matrix for allocation-free inner loops.
#[derive(Debug, Clone)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn new(m: &Mat) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    /// `out += self * x`
    #[inline]
    fn acc(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `x^T self x`
    #[inline]
    fn quad(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            s += x[i] * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }
}

/// Words of the ChaCha stream reserved per time step.
const STEP_STRIDE: u128 = 1 << 16;

/// Independent Gaussian stream for one trajectory, keyed by
/// `(seed, replicate, trajectory)`. Time step `t` reads from a fixed offset,
/// so draws do not depend on evaluation order.
pub fn noise_stream(seed: u64, replicate: u64, trajectory: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    key[16..24].copy_from_slice(&trajectory.to_le_bytes());
    key[24..32].copy_from_slice(b"lqgh-sim");
    ChaCha8Rng::from_seed(key)
}

fn fill_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}

/// Outputs and inputs of one rollout, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dy: usize,
    pub du: usize,
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
    pub seed: u64,
    pub replicate: u64,
    pub policy: String,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn y(&self, n: usize, t: usize) -> &[f64] {
        &self.trajectories[n].y[t * self.dy..(t + 1) * self.dy]
    }

    pub fn u(&self, n: usize, t: usize) -> &[f64] {
        &self.trajectories[n].u[t * self.du..(t + 1) * self.du]
    }

    /// CSV with columns `replicate, t, y_1.., u_1..`; the first column is the
    /// trajectory index within the dataset.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["replicate".to_string(), "t".to_string()];
        header.extend((1..=self.dy).map(|i| format!("y_{i}")));
        header.extend((1..=self.du).map(|i| format!("u_{i}")));
        let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
        out.write_record(&header).map_err(io)?;
        for n in 0..self.n() {
            for t in 0..self.horizon {
                let mut rec = vec![n.to_string(), t.to_string()];
                rec.extend(self.y(n, t).iter().chain(self.u(n, t)).map(|v| format!("{v:.16e}")));
                out.write_record(&rec).map_err(io)?;
            }
        }
        out.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Plant in feedback with an exploration policy, ready to generate rollouts.
#[derive(Debug, Clone)]
pub struct Simulator {
    n: usize,
    k: usize,
    dy: usize,
    du: usize,
    m: usize,
    a: Dense,
    b: Dense,
    c: Dense,
    w_sqrt: Dense,
    v_sqrt: Dense,
    x0_sqrt: Dense,
    a_e: Dense,
    b_e: Dense,
    c_e: Dense,
    d_y: Dense,
    d_eta: Dense,
    b_e_eta: Dense,
    policy: String,
    warnings: Vec<String>,
}

impl Simulator {
    /// `x_0 ~ N(0, Sigma)` with `Sigma` the stationary predictor error
    /// covariance, policy state starts at zero.
    pub fn new(plant: &PlantInstance, sol: &LqgSolution, policy: &ExplorationPolicy) -> Result<Self> {
        policy.check(plant)?;
        let joint = block(&[
            &[Some(&(&plant.a + &plant.b * &policy.d_y * &plant.c)), Some(&(&plant.b * &policy.c_exp))],
            &[Some(&(&policy.b_exp * &plant.c)), Some(&policy.a_exp)],
        ]);
        let rho = spectral_radius(&joint);
        let mut warnings = Vec::new();
        if rho >= 1.0 {
            warnings.push(format!("exploration closed loop is not stable (spectral radius {rho:.6e})"));
        }
        Ok(Self {
            n: plant.n(),
            k: policy.order(),
            dy: plant.dy(),
            du: plant.du(),
            m: policy.noise_dim(),
            a: Dense::new(&plant.a),
            b: Dense::new(&plant.b),
            c: Dense::new(&plant.c),
            w_sqrt: Dense::new(&psd_sqrt(&plant.sigma_w)),
            v_sqrt: Dense::new(&psd_sqrt(&plant.sigma_v)),
            x0_sqrt: Dense::new(&psd_sqrt(&sol.sigma)),
            a_e: Dense::new(&policy.a_exp),
            b_e: Dense::new(&policy.b_exp),
            c_e: Dense::new(&policy.c_exp),
            d_y: Dense::new(&policy.d_y),
            d_eta: Dense::new(&policy.d_eta),
            b_e_eta: Dense::new(&policy.b_exp_eta),
            policy: format!("{:?}", policy.kind),
            warnings,
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rollout(&self, horizon: usize, seed: u64, replicate: u64, trajectory: u64) -> Trajectory {
        let (n, k, dy, du, m) = (self.n, self.k, self.dy, self.du, self.m);
        let mut rng = noise_stream(seed, replicate, trajectory);
        let mut z = vec![0.0; n.max(dy).max(m)];
        let mut x = vec![0.0; n];
        fill_normal(&mut rng, &mut z[..n]);
        self.x0_sqrt.acc(&z[..n], &mut x);
        let mut xe = vec![0.0; k];
        let (mut xn, mut xen) = (vec![0.0; n], vec![0.0; k]);
        let (mut y, mut u) = (vec![0.0; dy], vec![0.0; du]);
        let mut eta = vec![0.0; m];
        let mut traj = Trajectory { y: Vec::with_capacity(horizon * dy), u: Vec::with_capacity(horizon * du) };
        for t in 0..horizon {
            rng.set_word_pos((t as u128 + 1) * STEP_STRIDE);
            y.iter_mut().for_each(|v| *v = 0.0);
            fill_normal(&mut rng, &mut z[..dy]);
            self.v_sqrt.acc(&z[..dy], &mut y);
            self.c.acc(&x, &mut y);
            fill_normal(&mut rng, &mut eta);
            u.iter_mut().for_each(|v| *v = 0.0);
            self.c_e.acc(&xe, &mut u);
            self.d_y.acc(&y, &mut u);
            self.d_eta.acc(&eta, &mut u);
            xn.iter_mut().for_each(|v| *v = 0.0);
            fill_normal(&mut rng, &mut z[..n]);
            self.w_sqrt.acc(&z[..n], &mut xn);
            self.a.acc(&x, &mut xn);
            self.b.acc(&u, &mut xn);
            xen.iter_mut().for_each(|v| *v = 0.0);
            self.a_e.acc(&xe, &mut xen);
            self.b_e.acc(&y, &mut xen);
            self.b_e_eta.acc(&eta, &mut xen);
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut xe, &mut xen);
            traj.y.extend_from_slice(&y);
            traj.u.extend_from_slice(&u);
        }
        traj
    }

    pub fn dataset(&self, trajectories: usize, horizon: usize, seed: u64, replicate: u64) -> Result<Dataset> {
        if trajectories == 0 || horizon == 0 {
            return Err(Error::InvalidParameter("N and T must be positive".into()));
        }
        let trajectories = (0..trajectories as u64).map(|i| self.rollout(horizon, seed, replicate, i)).collect();
        Ok(Dataset {
            dy: self.dy,
            du: self.du,
            horizon,
            trajectories,
            seed,
            replicate,
            policy: self.policy.clone(),
            warnings: self.warnings.clone(),
        })
    }
}

/// `N` rollouts of length `T` from replicate stream 0.
pub fn simulate(plant: &PlantInstance, policy: &ExplorationPolicy, n: usize, t: usize, seed: u64) -> Result<Dataset> {
    let sol = synthesize(plant)?;
    Simulator::new(plant, &sol, policy)?.dataset(n, t, seed, 0)
}

/// Scaling of the negative log-likelihood across trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NllNormalization {
    /// `(1/2N) sum_n sum_t |e|^2_{Sigma_e^{-1}} + (T/2) log|Sigma_e|`, the
    /// average per-trajectory likelihood.
    #[default]
    Paper,
    /// Joint likelihood of all `N` trajectories, `N` times the above.
    Joint,
}

/// Stationary Kalman predictor at a fixed parameter, `x_hat_0 = 0`.
#[derive(Debug, Clone)]
pub struct Predictor {
    n: usize,
    dy: usize,
    du: usize,
    a: Dense,
    b: Dense,
    c: Dense,
    l: Dense,
    s_inv: Dense,
    pub log_det_sigma_e: f64,
}

impl Predictor {
    pub fn new(plant: &PlantInstance, sol: &LqgSolution) -> Result<Self> {
        let chol = sol.sigma_e.clone().cholesky().ok_or(Error::NotPositiveDefinite("Sigma_e"))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            n: plant.n(),
            dy: plant.dy(),
            du: plant.du(),
            a: Dense::new(&plant.a),
            b: Dense::new(&plant.b),
            c: Dense::new(&plant.c),
            l: Dense::new(&sol.l),
            s_inv: Dense::new(&chol.inverse()),
            log_det_sigma_e: log_det,
        })
    }

    pub fn at(family: &dyn ParametricFamily, theta: &[f64]) -> Result<Self> {
        let plant = family.eval(theta)?;
        let sol = synthesize(&plant)?;
        Self::new(&plant, &sol)
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.dy != self.dy || data.du != self.du {
            return Err(Error::Dimension("dataset does not match the model".into()));
        }
        Ok(())
    }

    /// Visit the innovations `e_t = y_t - C x_hat_t` of one trajectory.
    fn for_each_innovation(&self, traj: &Trajectory, horizon: usize, mut visit: impl FnMut(usize, &[f64])) {
        let (n, dy, du) = (self.n, self.dy, self.du);
        let mut x = vec![0.0; n];
        let mut xn = vec![0.0; n];
        let mut e = vec![0.0; dy];
        for t in 0..horizon {
            let y = &traj.y[t * dy..(t + 1) * dy];
            let u = &traj.u[t * du..(t + 1) * du];
            e.iter_mut().for_each(|v| *v = 0.0);
            self.c.acc(&x, &mut e);
            for (ei, yi) in e.iter_mut().zip(y) {
                *ei = yi - *ei;
            }
            visit(t, &e);
            xn.iter_mut().for_each(|v| *v = 0.0);
            self.a.acc(&x, &mut xn);
            self.b.acc(u, &mut xn);
            self.l.acc(&e, &mut xn);
            std::mem::swap(&mut x, &mut xn);
        }
    }

    /// `sum_t |e_t|^2_{Sigma_e^{-1}}` for one trajectory.
    pub fn quadratic(&self, data: &Dataset, n: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_innovation(&data.trajectories[n], data.horizon, |_, e| s += self.s_inv.quad(e));
        s
    }

    /// Innovations of trajectory `n`, time-major.
    pub fn innovations(&self, data: &Dataset, n: usize) -> Result<Vec<f64>> {
        self.check(data)?;
        let mut out = Vec::with_capacity(data.horizon * self.dy);
        self.for_each_innovation(&data.trajectories[n], data.horizon, |_, e| out.extend_from_slice(e));
        Ok(out)
    }

    pub fn nll(&self, data: &Dataset, norm: NllNormalization) -> Result<f64> {
        self.check(data)?;
        let quad: f64 = (0..data.n()).map(|n| self.quadratic(data, n)).sum();
        let (nn, t) = (data.n() as f64, data.horizon as f64);
        let per_traj = quad / (2.0 * nn) + 0.5 * t * self.log_det_sigma_e;
        Ok(match norm {
            NllNormalization::Paper => per_traj,
            NllNormalization::Joint => nn * per_traj,
        })
    }
}

/// Negative log-likelihood (without the `2 pi` constant) of the dataset
/// under the model at `theta`.
pub fn nll(data: &Dataset, family: &dyn ParametricFamily, theta: &[f64]) -> Result<f64> {
    nll_with(data, family, theta, NllNormalization::Paper)
}

pub fn nll_with(data: &Dataset, family: &dyn ParametricFamily, theta: &[f64], norm: NllNormalization) -> Result<f64> {
    Predictor::at(family, theta)?.nll(data, norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleResult {
    pub theta: f64,
    pub nll: f64,
    pub evaluations: usize,
    pub at_boundary: bool,
}

/// Bracketed maximum likelihood for a scalar parameter.
pub fn mle_scalar(data: &Dataset, family: &dyn ParametricFamily, bracket: (f64, f64)) -> Result<MleResult> {
    if family.dim() != 1 {
        return Err(Error::InvalidParameter("scalar MLE needs a one-parameter family".into()));
    }
    let mut f = |th: f64| nll(data, family, &[th]);
    let r = brent(&mut f, bracket.0, bracket.1, 1e-8)?;
    Ok(MleResult { theta: r.x, nll: r.fx, evaluations: r.evaluations, at_boundary: r.at_boundary })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Mle { bracket: (f64, f64) },
    /// Skip estimation and use the given value.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n: usize,
    pub t: usize,
    pub replicates: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CePipelineResult {
    pub theta_hat: Vec<f64>,
    /// Excess cost per replicate; `None` when the learned controller does not
    /// stabilize the true plant.
    pub excess: Vec<Option<f64>>,
    pub failures: usize,
    pub boundary_hits: usize,
    pub mean: f64,
    pub std_err: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub replicates: usize,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    pub warnings: Vec<String>,
}

/// Sample mean and standard error.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

struct Outcome {
    theta_hat: f64,
    excess: Option<f64>,
    at_boundary: bool,
}

fn learned_excess(truth: &PlantInstance, j_star: f64, model: &dyn ParametricFamily, theta_hat: f64) -> Result<Option<f64>> {
    let plant_hat = match model.eval(&[theta_hat]) {
        Ok(p) => p,
        Err(_) => return Ok(None),
    };
    let sol_hat = match synthesize(&plant_hat) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    match evaluate_cost(truth, &lqg_controller(&sol_hat, &plant_hat)) {
        Ok(j) => Ok(Some(j - j_star)),
        Err(Error::ClosedLoopUnstable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Simulate under the true plant, estimate with the (possibly misspecified)
/// model family, deploy the certainty-equivalent controller on the truth.
fn run_pipeline(
    truth: &PlantInstance,
    model: &dyn ParametricFamily,
    policy: &PolicySpec,
    cfg: &PipelineConfig,
) -> Result<CePipelineResult> {
    if model.dim() != 1 {
        return Err(Error::InvalidParameter("the pipeline estimates a scalar parameter".into()));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    let sol = synthesize(truth)?;
    let pol = policy.resolve(truth, &sol)?;
    let sim = Simulator::new(truth, &sol, &pol)?;
    let outcomes: Vec<Result<Outcome>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let (theta_hat, at_boundary) = match cfg.estimator {
                Estimator::Fixed(v) => (v, false),
                Estimator::Mle { bracket } => {
                    let data = sim.dataset(cfg.n, cfg.t, cfg.seed, r)?;
                    let m = mle_scalar(&data, model, bracket)?;
                    (m.theta, m.at_boundary)
                }
            };
            let excess = learned_excess(truth, sol.j_star, model, theta_hat)?;
            Ok(Outcome { theta_hat, excess, at_boundary })
        })
        .collect();
    let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let mut warnings = sim.warnings().to_vec();
    let mut clipped = 0;
    let excess: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| {
            o.excess.map(|e| {
                if e < 0.0 {
                    if e < -1e-9 * (1.0 + sol.j_star) {
                        clipped += 1;
                    }
                    0.0
                } else {
                    e
                }
            })
        })
        .collect();
    if clipped > 0 {
        warnings.push(format!("{clipped} negative excess samples clipped at zero"));
    }
    let failures = excess.iter().filter(|e| e.is_none()).count();
    if failures > 0 {
        warnings.push(format!("{failures} replicates produced a destabilizing controller"));
    }
    let boundary_hits = outcomes.iter().filter(|o| o.at_boundary).count();
    if boundary_hits > 0 {
        warnings.push(format!("{boundary_hits} estimates at the bracket boundary"));
    }
    let ok: Vec<f64> = excess.iter().flatten().copied().collect();
    let (mean, std_err) = mean_and_stderr(&ok);
    Ok(CePipelineResult {
        theta_hat: outcomes.iter().map(|o| o.theta_hat).collect(),
        excess,
        failures,
        boundary_hits,
        mean,
        std_err,
        n: cfg.n,
        t: cfg.t,
        replicates: cfg.replicates,
        j_star: sol.j_star,
        warnings,
    })
}

/// Certainty-equivalence excess cost over independent replicates.
pub fn ce_pipeline(
    family: &dyn ParametricFamily,
    theta_true: f64,
    policy: &PolicySpec,
    cfg: &PipelineConfig,
) -> Result<CePipelineResult> {
    let truth = family.eval(&[theta_true])?;
    run_pipeline(&truth, family, policy, cfg)
}

/// Like [`ce_pipeline`], but the parameter is estimated within `model`, which
/// need not contain the true plant `family(theta_true)`.
pub fn misspecified_pipeline(
    family: &dyn ParametricFamily,
    theta_true: f64,
    model: &dyn ParametricFamily,
    policy: &PolicySpec,
    cfg: &PipelineConfig,
) -> Result<CePipelineResult> {
    let truth = family.eval(&[theta_true])?;
    run_pipeline(&truth, model, policy, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalFisher {
    pub mean: f64,
    pub std_err: f64,
    pub replicates: usize,
}

/// Average second central difference (`h = 1e-4`) of the single-trajectory
/// negative log-likelihood at `theta`.
pub fn empirical_fisher(
    family: &dyn ParametricFamily,
    theta: f64,
    policy: &PolicySpec,
    horizon: usize,
    replicates: usize,
    seed: u64,
) -> Result<EmpiricalFisher> {
    if family.dim() != 1 || replicates == 0 {
        return Err(Error::InvalidParameter("scalar family and at least one replicate required".into()));
    }
    let h = 1e-4;
    let truth = family.eval(&[theta])?;
    let sol = synthesize(&truth)?;
    let sim = Simulator::new(&truth, &sol, &policy.resolve(&truth, &sol)?)?;
    let preds = [Predictor::at(family, &[theta - h])?, Predictor::new(&truth, &sol)?, Predictor::at(family, &[theta + h])?];
    let values: Vec<Result<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = sim.dataset(1, horizon, seed, r)?;
            let q: Vec<f64> = preds.iter().map(|p| p.quadratic(&data, 0)).collect();
            let ld: Vec<f64> = preds.iter().map(|p| p.log_det_sigma_e).collect();
            let t = horizon as f64;
            Ok((0.5 * (q[0] - 2.0 * q[1] + q[2]) + 0.5 * t * (ld[0] - 2.0 * ld[1] + ld[2])) / (h * h))
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let (mean, std_err) = mean_and_stderr(&values);
    Ok(EmpiricalFisher { mean, std_err, replicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{AffineFamily, PlantDerivative};
    use crate::hardness::fisher_finite_t;
    use crate::matsolve::dense::{eye, mat, scalar, symmetrize};
    use crate::matsolve::solve_dlyap;

    fn stable_family() -> AffineFamily {
        let plant = PlantInstance::new(
            mat(&[&[0.8, 0.3], &[-0.2, 0.6]]),
            mat(&[&[0.5], &[1.0]]),
            mat(&[&[1.0, 0.4]]),
            mat(&[&[1.0, 0.2], &[0.2, 0.5]]),
            scalar(0.3),
            eye(2),
            scalar(1.0),
        )
        .unwrap();
        let mut d = PlantDerivative::zero_like(&plant);
        d.a[(0, 0)] = 1.0;
        AffineFamily::scalar(0.8, plant, d).unwrap()
    }

    fn setup(eta: f64) -> (AffineFamily, PlantInstance, LqgSolution, ExplorationPolicy) {
        let fam = stable_family();
        let plant = fam.eval(&[0.8]).unwrap();
        let sol = synthesize(&plant).unwrap();
        let pol = ExplorationPolicy::optimal_lqg(&plant, &sol, eta);
        (fam, plant, sol, pol)
    }

    #[test]
    fn same_seed_same_dataset() {
        let (_, plant, _, pol) = setup(1.0);
        let a = simulate(&plant, &pol, 3, 50, 7).unwrap();
        let b = simulate(&plant, &pol, 3, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate(&plant, &pol, 3, 50, 8).unwrap();
        assert_ne!(a.trajectories[0].y, c.trajectories[0].y);
        // Trajectory n does not depend on how many others are drawn.
        let d = simulate(&plant, &pol, 1, 50, 7).unwrap();
        assert_eq!(a.trajectories[0], d.trajectories[0]);
    }

    #[test]
    fn noiseless_limit_is_quiet() {
        let tiny = 1e-12;
        let plant = PlantInstance::new(
            mat(&[&[0.8, 0.3], &[-0.2, 0.6]]),
            mat(&[&[0.5], &[1.0]]),
            mat(&[&[1.0, 0.4]]),
            eye(2) * tiny,
            scalar(tiny),
            eye(2),
            scalar(1.0),
        )
        .unwrap();
        let sol = synthesize(&plant).unwrap();
        let pol = ExplorationPolicy::optimal_lqg(&plant, &sol, 0.0);
        let data = simulate(&plant, &pol, 2, 100, 1).unwrap();
        assert!(data.trajectories.iter().all(|tr| tr.y.iter().all(|v| v.abs() < 1e-4)));
    }

    #[test]
    fn output_covariance_matches_lyapunov() {
        let (_, plant, sol, pol) = setup(1.0);
        let data = Simulator::new(&plant, &sol, &pol).unwrap().dataset(200, 500, 11, 0).unwrap();
        let burn = 50;
        let mut s = 0.0;
        let mut count = 0.0;
        for n in 0..data.n() {
            for t in burn..data.horizon {
                s += data.y(n, t)[0].powi(2);
                count += 1.0;
            }
        }
        let sample = s / count;
        let joint_a = block(&[
            &[Some(&plant.a), Some(&(&plant.b * &pol.c_exp))],
            &[Some(&(&pol.b_exp * &plant.c)), Some(&pol.a_exp)],
        ]);
        let g = block(&[
            &[Some(&eye(2)), None, Some(&(&plant.b * &pol.d_eta))],
            &[None, Some(&pol.b_exp), Some(&pol.b_exp_eta)],
        ]);
        let noise = crate::matsolve::dense::blkdiag(
            &crate::matsolve::dense::blkdiag(&plant.sigma_w, &plant.sigma_v),
            &eye(1),
        );
        let x = solve_dlyap(&joint_a, &symmetrize(&(&g * noise * g.transpose()))).unwrap();
        let cx = &plant.c * x.view((0, 0), (2, 2)) * plant.c.transpose();
        let oracle = cx[(0, 0)] + plant.sigma_v[(0, 0)];
        assert!((sample - oracle).abs() <= 0.05 * oracle, "{sample} vs {oracle}");
    }

    #[test]
    fn single_step_nll_uses_zero_prediction() {
        let (fam, plant, sol, pol) = setup(1.0);
        let data = simulate(&plant, &pol, 4, 1, 3).unwrap();
        let v = nll(&data, &fam, &[0.8]).unwrap();
        let se = sol.sigma_e[(0, 0)];
        let quad: f64 = (0..4).map(|n| data.y(n, 0)[0].powi(2) / se).sum();
        let want = quad / 8.0 + 0.5 * se.ln();
        assert!((v - want).abs() < 1e-12);
        let joint = nll_with(&data, &fam, &[0.8], NllNormalization::Joint).unwrap();
        assert!((joint - 4.0 * v).abs() < 1e-12);
    }

    #[test]
    fn recursive_prediction_matches_convolution() {
        let (_, plant, sol, pol) = setup(0.5);
        let data = simulate(&plant, &pol, 1, 40, 5).unwrap();
        let pred = Predictor::new(&plant, &sol).unwrap();
        let innov = pred.innovations(&data, 0).unwrap();
        let ao = &sol.a_cl_o;
        for t in 0..40 {
            // y_hat_t = sum_{k<t} C A_o^{t-1-k} (B u_k + L y_k)
            let mut yhat = 0.0;
            let mut pow = eye(2);
            for k in (0..t).rev() {
                let drive = &plant.b * data.u(0, k)[0] + &sol.l * data.y(0, k)[0];
                yhat += (&plant.c * &pow * drive)[(0, 0)];
                pow = &pow * ao;
            }
            let direct = data.y(0, t)[0] - yhat;
            assert!((direct - innov[t]).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn innovations_are_white_with_unit_normalized_variance() {
        let (fam, plant, sol, pol) = setup(1.0);
        let (nn, t) = (40, 500);
        let data = simulate(&plant, &pol, nn, t, 9).unwrap();
        let pred = Predictor::new(&plant, &sol).unwrap();
        let se = sol.sigma_e[(0, 0)];
        let (mut lag0, mut lag1) = (0.0, 0.0);
        for n in 0..nn {
            let e: Vec<f64> = pred.innovations(&data, n).unwrap().iter().map(|x| x / se.sqrt()).collect();
            lag0 += e.iter().map(|x| x * x).sum::<f64>();
            lag1 += e.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
        }
        let total = (nn * t) as f64;
        assert!((lag0 / total - 1.0).abs() <= 0.03);
        assert!((lag1 / lag0).abs() <= 3.0 / total.sqrt());
        // Quadratic part of the nll per step is dy / 2.
        let v = nll(&data, &fam, &[0.8]).unwrap() - 0.5 * t as f64 * se.ln();
        assert!((v / t as f64 - 0.5).abs() <= 0.03 * 0.5);
    }

    #[test]
    fn mle_recovers_parameter_and_flags_boundary() {
        let (fam, plant, _, pol) = setup(1.0);
        let data = simulate(&plant, &pol, 20, 400, 2).unwrap();
        let m = mle_scalar(&data, &fam, (0.5, 1.0)).unwrap();
        assert!((m.theta - 0.8).abs() < 0.02 && !m.at_boundary, "{m:?}");
        let m = mle_scalar(&data, &fam, (0.6, 0.7)).unwrap();
        assert!(m.at_boundary && (m.theta - 0.7).abs() < 1e-6);
    }

    #[test]
    fn fixed_estimate_has_no_excess() {
        let fam = stable_family();
        let cfg = PipelineConfig { n: 2, t: 10, replicates: 5, seed: 1, estimator: Estimator::Fixed(0.8) };
        let r = ce_pipeline(&fam, 0.8, &PolicySpec::Optimal { eta: 1.0 }, &cfg).unwrap();
        assert!(r.excess.iter().all(|e| e.unwrap() <= 1e-10));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let fam = stable_family();
        let cfg = PipelineConfig { n: 5, t: 100, replicates: 6, seed: 4, estimator: Estimator::Mle { bracket: (0.5, 1.0) } };
        let a = ce_pipeline(&fam, 0.8, &PolicySpec::Optimal { eta: 1.0 }, &cfg).unwrap();
        let b = ce_pipeline(&fam, 0.8, &PolicySpec::Optimal { eta: 1.0 }, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.mean >= 0.0);
    }

    #[test]
    fn empirical_fisher_matches_finite_horizon() {
        let fam = stable_family();
        let pol = PolicySpec::Optimal { eta: 1.0 };
        let t = 200;
        let emp = empirical_fisher(&fam, 0.8, &pol, t, 400, 21).unwrap();
        let exact = fisher_finite_t(&fam, &[0.8], &pol, &[1.0], t).unwrap();
        assert!((emp.mean - exact).abs() <= 4.0 * emp.std_err.max(0.01 * exact), "{emp:?} vs {exact}");
    }
}
