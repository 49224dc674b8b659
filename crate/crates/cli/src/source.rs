//! Instance and policy loading from catalog specs and JSON files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use lqgh_core::hardness::HessianKind;
use lqgh_core::instances::{self, CatalogEntry};
use lqgh_core::lqg::{LinearController, PlantJson};
use lqgh_core::matsolve::dense::from_rows;
use lqgh_core::{AffineFamily, Mat, PlantDerivative, PolicySpec, StateSpaceTF};

/// A resolved instance: either a catalog entry or a JSON-defined affine family.
pub struct Instance {
    pub label: String,
    pub catalog: Option<(String, Vec<(String, f64)>)>,
    pub family: AffineFamily,
    pub theta: Vec<f64>,
    pub policy: PolicySpec,
    pub hessian_kind: HessianKind,
    pub bracket: (f64, f64),
}

impl Instance {
    fn from_entry(entry: CatalogEntry, name: String, params: Vec<(String, f64)>) -> Self {
        let mut label = name.clone();
        if !entry.params.is_empty() {
            let items: Vec<String> = entry.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            label = format!("{label}:{}", items.join(","));
        }
        Self {
            label,
            catalog: Some((name, params)),
            family: entry.family,
            theta: entry.theta_star,
            policy: entry.policy,
            hessian_kind: entry.hessian_kind,
            bracket: entry.mle_bracket,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DerivativeJson {
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma_w")]
    sigma_w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma_v")]
    sigma_v: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct InstanceJson {
    #[serde(flatten)]
    plant: PlantJson,
    theta: Option<Vec<f64>>,
    #[serde(default)]
    derivatives: Vec<DerivativeJson>,
    bracket: Option<(f64, f64)>,
}

fn matrix(rows: &Option<Vec<Vec<f64>>>, name: &str, zero: &Mat) -> Result<Mat> {
    match rows {
        None => Ok(zero.clone()),
        Some(r) => {
            let m = from_rows(r, name)?;
            if m.shape() != zero.shape() {
                bail!("derivative {name} has shape {:?}, expected {:?}", m.shape(), zero.shape());
            }
            Ok(m)
        }
    }
}

fn parse_instance_json(text: &str, label: String) -> Result<Instance> {
    let raw: InstanceJson = serde_json::from_str(text).map_err(|e| lqgh_core::Error::Parse(e.to_string()))?;
    let plant = raw.plant.into_plant()?;
    if raw.derivatives.is_empty() {
        bail!("instance JSON needs a non-empty \"derivatives\" list of parameter directions");
    }
    let zero = PlantDerivative::zero_like(&plant);
    let directions = raw
        .derivatives
        .iter()
        .map(|d| {
            Ok(PlantDerivative {
                a: matrix(&d.a, "A", &zero.a)?,
                b: matrix(&d.b, "B", &zero.b)?,
                c: matrix(&d.c, "C", &zero.c)?,
                sigma_w: matrix(&d.sigma_w, "Sigma_w", &zero.sigma_w)?,
                sigma_v: matrix(&d.sigma_v, "Sigma_v", &zero.sigma_v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let theta = raw.theta.unwrap_or_else(|| vec![0.0; directions.len()]);
    if theta.len() != directions.len() {
        bail!("theta has {} entries but {} derivative directions are given", theta.len(), directions.len());
    }
    let bracket = raw.bracket.unwrap_or((theta[0] - 0.5, theta[0] + 0.5));
    Ok(Instance {
        label,
        catalog: None,
        family: AffineFamily::new(theta.clone(), plant, directions)?,
        theta,
        policy: PolicySpec::Optimal { eta: 1.0 },
        hessian_kind: HessianKind::Strict,
        bracket,
    })
}

/// `--instance` is a path to a JSON file if it names an existing file or ends
/// in `.json`, and a catalog spec `name[:key=value,...]` otherwise. `--param`
/// overrides apply to catalog instances only.
pub fn load_instance(spec: &str, params: &[String]) -> Result<Instance> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        if !params.is_empty() {
            bail!("--param applies to catalog instances only");
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading instance file {spec}"))?;
        return parse_instance_json(&text, spec.to_string()).with_context(|| format!("instance file {spec}"));
    }
    let (name, mut overrides) = instances::parse_spec(spec)?;
    for p in params {
        overrides.extend(instances::parse_spec(&format!("x:{p}"))?.1);
    }
    let entry = instances::lookup(&name, &overrides)?;
    Ok(Instance::from_entry(entry, name, overrides))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(file: &str) -> Result<T> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
    serde_json::from_str(&text).map_err(|e| lqgh_core::Error::Parse(format!("{file}: {e}")).into())
}

/// Controller realization from `{"A", "B", "C", "D"}`; empty `A` gives a
/// static gain.
pub fn load_controller(file: &str) -> Result<LinearController> {
    let raw: ControllerJson = read_json(file)?;
    let d = from_rows(&raw.d, "D")?;
    if raw.a.is_empty() {
        return Ok(LinearController::static_gain(d));
    }
    let sys = StateSpaceTF::new(from_rows(&raw.a, "A")?, from_rows(&raw.b, "B")?, from_rows(&raw.c, "C")?, d)?;
    Ok(LinearController::new(sys))
}

/// `optimal | static | static:FILE | custom:FILE`, optionally followed by
/// `+noise:ETA`. `None` keeps the instance default.
pub fn parse_policy(spec: Option<&str>, default: &PolicySpec) -> Result<PolicySpec> {
    let Some(spec) = spec else {
        return Ok(default.clone());
    };
    let (base, eta) = match spec.split_once("+noise:") {
        Some((b, e)) => (b, e.parse::<f64>().with_context(|| format!("bad probing scale `{e}`"))?),
        None => (spec, 0.0),
    };
    if !eta.is_finite() {
        bail!("probing scale must be finite");
    }
    let (kind, file) = match base.split_once(':') {
        Some((k, f)) => (k, Some(f)),
        None => (base, None),
    };
    Ok(match (kind, file) {
        ("optimal", None) => PolicySpec::Optimal { eta },
        ("static", None) => PolicySpec::StaticOptimal { eta },
        ("static", Some(f)) => {
            let rows: Vec<Vec<f64>> = read_json(f)?;
            PolicySpec::Static { f: from_rows(&rows, "F")?, eta }
        }
        ("custom", Some(f)) => PolicySpec::Custom { k: load_controller(f)?.realization, eta },
        _ => bail!("unknown policy `{spec}` (expected optimal, static, static:FILE or custom:FILE, with optional +noise:ETA)"),
    })
}

pub fn describe_policy(p: &PolicySpec) -> String {
    match p {
        PolicySpec::Optimal { eta } => format!("optimal+noise:{eta}"),
        PolicySpec::StaticOptimal { eta } => format!("static+noise:{eta}"),
        PolicySpec::Static { eta, .. } => format!("static:file+noise:{eta}"),
        PolicySpec::Custom { eta, .. } => format!("custom:file+noise:{eta}"),
    }
}

/// Comma-separated values, or `log:LO:HI:COUNT` / `lin:LO:HI:COUNT`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!(lqgh_core::Error::InvalidParameter("empty grid".into()));
    }
    for (prefix, log) in [("log:", true), ("lin:", false)] {
        if let Some(rest) = spec.strip_prefix(prefix) {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                bail!("grid `{spec}` must be {prefix}LO:HI:COUNT");
            }
            let lo: f64 = parts[0].parse().context("grid start")?;
            let hi: f64 = parts[1].parse().context("grid end")?;
            let k: usize = parts[2].parse().context("grid count")?;
            if k == 0 {
                bail!(lqgh_core::Error::InvalidParameter("empty grid".into()));
            }
            if log && (lo <= 0.0 || hi <= 0.0) {
                bail!("log grid needs positive ends");
            }
            return Ok((0..k)
                .map(|i| {
                    let s = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
                    if i == 0 {
                        lo
                    } else if i + 1 == k {
                        hi
                    } else if log {
                        (lo.ln() + s * (hi.ln() - lo.ln())).exp()
                    } else {
                        lo + s * (hi - lo)
                    }
                })
                .collect());
        }
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`")))
        .collect()
}
