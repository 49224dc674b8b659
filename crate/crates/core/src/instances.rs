//! Catalog of fragile LQG instances, log-log rate fits, parameter sweeps and
//! the sensor co-design objective.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{AffineFamily, ParametricFamily, PlantDerivative};
use crate::hardness::{hardness_report, HessianKind, PolicySpec, ReportOptions};
use crate::lqg::{synthesize, PlantInstance};
use crate::matsolve::dense::{eye, mat, scalar};
use crate::optimize::{grid_then_golden, ScalarMin};

/// A named parametric instance with its nominal parameter and the
/// exploration policy and Hessian characterization it is analysed with.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<(String, f64)>,
    pub family: AffineFamily,
    pub theta_star: Vec<f64>,
    pub policy: PolicySpec,
    pub hessian_kind: HessianKind,
    /// Key of the parameter varied by sweeps.
    pub sweep_param: &'static str,
    /// Search interval for scalar maximum likelihood.
    pub mle_bracket: (f64, f64),
    pub expected: &'static str,
}

impl CatalogEntry {
    pub fn plant(&self) -> Result<PlantInstance> {
        self.family.eval(&self.theta_star)
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn ones2() -> crate::Mat {
    mat(&[&[1.0, 1.0], &[1.0, 1.0]])
}

/// `A = [[2, 1], [0, 2]]`, `B = [0; theta]`, `C = [1, 0]`,
/// `Sigma_w = Q = [[1, 1], [1, 1]]`, `Sigma_v = R = sigma`, `theta* = 1`.
pub fn doyle(sigma: f64) -> Result<CatalogEntry> {
    positive("sigma", sigma)?;
    let plant = PlantInstance::new(
        mat(&[&[2.0, 1.0], &[0.0, 2.0]]),
        mat(&[&[0.0], &[1.0]]),
        mat(&[&[1.0, 0.0]]),
        ones2(),
        scalar(sigma),
        ones2(),
        scalar(sigma),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.b[(1, 0)] = 1.0;
    Ok(CatalogEntry {
        name: "doyle",
        params: vec![("sigma".into(), sigma)],
        family: AffineFamily::scalar(1.0, plant, d)?,
        theta_star: vec![1.0],
        policy: PolicySpec::Optimal { eta: 1.0 },
        hessian_kind: HessianKind::Strict,
        sweep_param: "sigma",
        mle_bracket: (0.5, 1.5),
        expected: "H ~ 2048 sigma^(-3/2)",
    })
}

/// Open-loop stable variant: `A = [[-0.5, 0.5], [0, -0.5]]`, `B = [theta; theta]`,
/// `C = [1, 1]`, `Q = diag(1, 0)`, `Sigma_w = diag(0, 1)`, `R = Sigma_v = sigma`.
pub fn doyle_stable(sigma: f64) -> Result<CatalogEntry> {
    positive("sigma", sigma)?;
    let plant = PlantInstance::new(
        mat(&[&[-0.5, 0.5], &[0.0, -0.5]]),
        mat(&[&[1.0], &[1.0]]),
        mat(&[&[1.0, 1.0]]),
        mat(&[&[0.0, 0.0], &[0.0, 1.0]]),
        scalar(sigma),
        mat(&[&[1.0, 0.0], &[0.0, 0.0]]),
        scalar(sigma),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.b = mat(&[&[1.0], &[1.0]]);
    Ok(CatalogEntry {
        name: "doyle_stable",
        params: vec![("sigma".into(), sigma)],
        family: AffineFamily::scalar(1.0, plant, d)?,
        theta_star: vec![1.0],
        policy: PolicySpec::Optimal { eta: 1.0 },
        hessian_kind: HessianKind::Strict,
        sweep_param: "sigma",
        mle_bracket: (0.5, 1.5),
        expected: "H ~ 2.53 sigma^(-3/2)",
    })
}

/// Sensor noise used for the fully observed variants.
pub const FULLY_OBSERVED_NOISE: f64 = 1e-8;

/// The Doyle system with `C = I` and negligible sensor noise, analysed with
/// the LQR Hessian.
pub fn doyle_fully_observed(sigma: f64) -> Result<CatalogEntry> {
    positive("sigma", sigma)?;
    let plant = PlantInstance::new(
        mat(&[&[2.0, 1.0], &[0.0, 2.0]]),
        mat(&[&[0.0], &[1.0]]),
        eye(2),
        ones2(),
        eye(2) * FULLY_OBSERVED_NOISE,
        ones2(),
        scalar(sigma),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.b[(1, 0)] = 1.0;
    Ok(CatalogEntry {
        name: "doyle_fully_observed",
        params: vec![("sigma".into(), sigma)],
        family: AffineFamily::scalar(1.0, plant, d)?,
        theta_star: vec![1.0],
        policy: PolicySpec::StaticOptimal { eta: 1.0 },
        hessian_kind: HessianKind::Lqr,
        sweep_param: "sigma",
        mle_bracket: (0.5, 1.5),
        expected: "H_lqr ~ 9 sigma^(-1/2)",
    })
}

/// Smallest `m > 0` with `rho(A + (1 + m) B F) >= 1`, by bisection on `[0, hi]`.
pub fn upper_gain_margin(plant: &PlantInstance, hi: f64) -> Result<f64> {
    let sol = synthesize(plant)?;
    let rho = |m: f64| crate::matsolve::dense::spectral_radius(&(&plant.a + &plant.b * &sol.f * (1.0 + m)));
    if rho(hi) < 1.0 {
        return Err(Error::InvalidParameter(format!("loop is still stable at gain increase {hi}")));
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if rho(mid) < 1.0 {
            lo = mid;
        } else {
            up = mid;
        }
        if up - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + up))
}

/// `A = [[1, 1], [theta, 1]]`, `B = [0; 1]`, `C = [-xi, 1]`, identity weights,
/// `theta* = 0`; a zero at `1 + xi` next to a double pole at 1.
pub fn nmp(xi: f64) -> Result<CatalogEntry> {
    positive("xi", xi)?;
    let plant = PlantInstance::new(
        mat(&[&[1.0, 1.0], &[0.0, 1.0]]),
        mat(&[&[0.0], &[1.0]]),
        mat(&[&[-xi, 1.0]]),
        eye(2),
        scalar(1.0),
        eye(2),
        scalar(1.0),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.a[(1, 0)] = 1.0;
    Ok(CatalogEntry {
        name: "nmp",
        params: vec![("xi".into(), xi)],
        family: AffineFamily::scalar(0.0, plant, d)?,
        theta_star: vec![0.0],
        policy: PolicySpec::Optimal { eta: 0.0 },
        hessian_kind: HessianKind::Strict,
        sweep_param: "xi",
        mle_bracket: (-0.5, 0.5),
        expected: "H ~ xi^-7, FI rate ~ xi^-3, J* ~ xi^-3",
    })
}

fn sensor_family(s: f64, sigma_w: crate::Mat) -> Result<AffineFamily> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter("s must be finite".into()));
    }
    let plant = PlantInstance::new(
        mat(&[&[1.0, 1.0], &[0.0, 1.0]]),
        mat(&[&[0.0], &[1.0]]),
        mat(&[&[1.0, s]]),
        sigma_w,
        scalar(1.0),
        eye(2),
        scalar(1.0),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.a[(0, 0)] = 1.0;
    AffineFamily::scalar(1.0, plant, d)
}

/// `A = [[theta, 1], [0, 1]]`, `B = [0; 1]`, `C = [1, s]`,
/// `Sigma_w = [[1, 1], [1, 1]]`, `theta* = 1`, explored with probing `eta I`.
pub fn compounding(s: f64, eta: f64) -> Result<CatalogEntry> {
    Ok(CatalogEntry {
        name: "compounding",
        params: vec![("s".into(), s), ("eta".into(), eta)],
        family: sensor_family(s, ones2())?,
        theta_star: vec![1.0],
        policy: PolicySpec::Optimal { eta },
        hessian_kind: HessianKind::Strict,
        sweep_param: "s",
        mle_bracket: (0.5, 1.5),
        expected: "J* -> 28, H ~ 86 s, FI ~ {18.6, 20.4, 194, 17600} s^-2 for eta = 0, 1, 10, 100",
    })
}

/// As [`compounding`] with `Sigma_w = I` and unit probing.
pub fn tradeoffs(s: f64) -> Result<CatalogEntry> {
    Ok(CatalogEntry {
        name: "tradeoffs",
        params: vec![("s".into(), s)],
        family: sensor_family(s, eye(2))?,
        theta_star: vec![1.0],
        policy: PolicySpec::Optimal { eta: 1.0 },
        hessian_kind: HessianKind::Strict,
        sweep_param: "s",
        mle_bracket: (0.5, 1.5),
        expected: "J* and H decrease in s, FI rate decreases in s",
    })
}

/// Fully observed family whose direction satisfies `A_dot = -B_dot F` at the
/// nominal point, so the optimal static gain excites nothing along it.
pub fn persistent_excitation_instance() -> Result<CatalogEntry> {
    let base = PlantInstance::new(
        mat(&[&[1.2, 0.5], &[0.0, 0.9]]),
        mat(&[&[0.0], &[1.0]]),
        eye(2),
        eye(2),
        eye(2) * FULLY_OBSERVED_NOISE,
        eye(2),
        scalar(1.0),
    )?;
    let f = synthesize(&base)?.f;
    let mut d = PlantDerivative::zero_like(&base);
    d.b = mat(&[&[1.0], &[0.0]]);
    d.a = -(&d.b * &f);
    Ok(CatalogEntry {
        name: "pe_loss",
        params: vec![],
        family: AffineFamily::scalar(0.0, base, d)?,
        theta_star: vec![0.0],
        policy: PolicySpec::StaticOptimal { eta: 0.0 },
        hessian_kind: HessianKind::Lqr,
        sweep_param: "",
        mle_bracket: (-0.5, 0.5),
        expected: "FI = 0 under the optimal static gain while H > 0",
    })
}

/// Model class `B = [theta; 1 + epsilon]` for the Doyle system; the true plant
/// is `theta = 0` with `epsilon = 0`.
pub fn doyle_misspecified(sigma: f64, epsilon: f64) -> Result<CatalogEntry> {
    positive("sigma", sigma)?;
    let plant = PlantInstance::new(
        mat(&[&[2.0, 1.0], &[0.0, 2.0]]),
        mat(&[&[0.0], &[1.0 + epsilon]]),
        mat(&[&[1.0, 0.0]]),
        ones2(),
        scalar(sigma),
        ones2(),
        scalar(sigma),
    )?;
    let mut d = PlantDerivative::zero_like(&plant);
    d.b[(0, 0)] = 1.0;
    Ok(CatalogEntry {
        name: "doyle_misspecified",
        params: vec![("sigma".into(), sigma), ("epsilon".into(), epsilon)],
        family: AffineFamily::scalar(0.0, plant, d)?,
        theta_star: vec![0.0],
        policy: PolicySpec::Optimal { eta: 1.0 },
        hessian_kind: HessianKind::Strict,
        sweep_param: "epsilon",
        mle_bracket: (-0.5, 0.5),
        expected: "excess floor ~ epsilon^2",
    })
}

pub const CATALOG: &[&str] =
    &["doyle", "doyle_stable", "doyle_fully_observed", "nmp", "compounding", "tradeoffs", "pe_loss", "doyle_misspecified"];

/// Catalog entry by name with `key = value` overrides of its defaults.
pub fn lookup(name: &str, overrides: &[(String, f64)]) -> Result<CatalogEntry> {
    let allowed: &[(&str, f64)] = match name {
        "doyle" | "doyle_stable" => &[("sigma", 0.25)],
        "doyle_fully_observed" => &[("sigma", 1e-4)],
        "nmp" => &[("xi", 0.1)],
        "compounding" => &[("s", 100.0), ("eta", 0.0)],
        "tradeoffs" => &[("s", 1.0)],
        "pe_loss" => &[],
        "doyle_misspecified" => &[("sigma", 0.25), ("epsilon", 0.005)],
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown instance `{name}` (known: {})",
                CATALOG.join(", ")
            )))
        }
    };
    let get = |key: &str| -> f64 {
        overrides
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| allowed.iter().find(|(k, _)| *k == key).map(|&(_, v)| v).unwrap_or(f64::NAN))
    };
    for (k, _) in overrides {
        if !allowed.iter().any(|(a, _)| a == k) {
            return Err(Error::InvalidParameter(format!("instance `{name}` has no parameter `{k}`")));
        }
    }
    match name {
        "doyle" => doyle(get("sigma")),
        "doyle_stable" => doyle_stable(get("sigma")),
        "doyle_fully_observed" => doyle_fully_observed(get("sigma")),
        "nmp" => nmp(get("xi")),
        "compounding" => compounding(get("s"), get("eta")),
        "tradeoffs" => tradeoffs(get("s")),
        "pe_loss" => persistent_excitation_instance(),
        _ => doyle_misspecified(get("sigma"), get("epsilon")),
    }
}

/// Parse `name` or `name:key=value,key=value`.
pub fn parse_spec(spec: &str) -> Result<(String, Vec<(String, f64)>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = Vec::new();
    for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value in `{item}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("bad number `{v}` for `{k}`")))?;
        params.push((k.trim().to_string(), v));
    }
    Ok((name.trim().to_string(), params))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    /// `c` in `value ~ c * param^slope`.
    pub constant: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
}

/// Least-squares fit of `log(value)` against `log(param)`.
pub fn rate_fit(grid: &[f64], values: &[f64]) -> Result<RateFit> {
    if grid.len() != values.len() {
        return Err(Error::Dimension("grid and values differ in length".into()));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidParameter("rate fit needs at least 3 points".into()));
    }
    if grid.iter().chain(values).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositive);
    }
    let monotone = grid.windows(2).all(|w| w[1] > w[0]) || grid.windows(2).all(|w| w[1] < w[0]);
    if !monotone {
        return Err(Error::InvalidParameter("rate fit grid must be strictly monotone".into()));
    }
    let x: Vec<f64> = grid.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / k).sqrt();
    Ok(RateFit { grid: grid.to_vec(), values: values.to_vec(), slope, constant: intercept.exp(), residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "FI_rate")]
    pub fi_rate: f64,
    pub bound: f64,
    pub warnings: Vec<String>,
}

/// Hardness quantities along a grid of one catalog parameter. Scalar
/// summaries are traces for multi-parameter families. Rows whose Fisher
/// information is singular carry the error as a warning and a NaN bound.
pub fn sweep(
    name: &str,
    base: &[(String, f64)],
    grid: &[f64],
    policy: Option<&PolicySpec>,
    n: usize,
    t: usize,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let key = lookup(name, base)?.sweep_param;
    if key.is_empty() {
        return Err(Error::InvalidParameter(format!("instance `{name}` has no sweep parameter")));
    }
    let rows: Vec<Result<SweepRow>> = grid
        .par_iter()
        .map(|&p| {
            let mut params = base.to_vec();
            params.push((key.to_string(), p));
            let entry = lookup(name, &params)?;
            let policy = policy.cloned().unwrap_or_else(|| entry.policy.clone());
            let opts = ReportOptions { n, t, use_finite_t: false, hessian_kind: entry.hessian_kind };
            match hardness_report(&entry.family, &entry.theta_star, &policy, &opts) {
                Ok(r) => Ok(SweepRow {
                    param: p,
                    j_star: r.j_star,
                    h: r.h.trace(),
                    fi_rate: r.fi_rate.trace(),
                    bound: r.bound,
                    warnings: r.warnings,
                }),
                Err(e @ Error::SingularFisher { .. }) => {
                    let nom = crate::hardness::Nominal::new(&entry.family, &entry.theta_star)?;
                    let h = crate::hardness::hessian_matrix(entry.hessian_kind, &entry.family, &entry.theta_star)?;
                    let fi = crate::hardness::fisher_matrix(&entry.family, &entry.theta_star, &policy)?;
                    Ok(SweepRow {
                        param: p,
                        j_star: nom.sol.j_star,
                        h: h.trace(),
                        fi_rate: fi.trace(),
                        bound: f64::NAN,
                        warnings: vec![e.to_string()],
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    rows.into_iter().collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    out.write_record(["param", "J_star", "H", "FI_rate", "bound", "warnings"]).map_err(io)?;
    for r in rows {
        let f = |v: f64| format!("{v:.16e}");
        out.write_record([f(r.param), f(r.j_star), f(r.h), f(r.fi_rate), f(r.bound), r.warnings.join("; ")])
            .map_err(io)?;
    }
    out.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}

/// `J*(s) + tr(H(s) FI(s)^{-1}) / N` with `FI` the asymptotic Fisher rate.
pub fn codesign_objective(family_of_s: &dyn Fn(f64) -> Result<CatalogEntry>, s: f64, n: f64) -> Result<f64> {
    let entry = family_of_s(s)?;
    let opts = ReportOptions { n: 1, t: 1, use_finite_t: false, hessian_kind: entry.hessian_kind };
    let r = hardness_report(&entry.family, &entry.theta_star, &entry.policy, &opts)?;
    // bound = tr(H FI^{-1}) / 4 with N = T = 1.
    Ok(r.j_star + 4.0 * r.bound / n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodesignResult {
    #[serde(rename = "N")]
    pub n: f64,
    pub s_star: f64,
    pub objective: f64,
    pub at_boundary: bool,
    pub grid: Vec<(f64, f64)>,
}

/// Minimize the co-design objective over a 33-point log-spaced grid of `s`,
/// refined by golden section.
pub fn codesign_minimize(
    family_of_s: &dyn Fn(f64) -> Result<CatalogEntry>,
    n: f64,
    bracket: (f64, f64),
) -> Result<CodesignResult> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let mut f = |s: f64| codesign_objective(family_of_s, s, n);
    let (best, grid): (ScalarMin, _) = grid_then_golden(&mut f, bracket.0, bracket.1, 33, bracket.0 > 0.0, 1e-8)?;
    Ok(CodesignResult { n, s_star: best.x, objective: best.fx, at_boundary: best.at_boundary, grid })
}

/// Zero plant derivative of the right shape, for building custom families.
pub fn zero_direction(plant: &PlantInstance) -> PlantDerivative {
    PlantDerivative::zero(plant.n(), plant.du(), plant.dy())
}
