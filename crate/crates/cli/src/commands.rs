//! Subcommand implementations. Every command renders its whole output in
//! memory before writing, so a failure never leaves a partial file.

use std::io::Write;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use lqgh_core::hardness::{fisher_matrix_finite_t, hessian_matrix, trace_h_fi_inv};
use lqgh_core::instances::{self, codesign_minimize, CodesignResult, SweepRow};
use lqgh_core::matsolve::dense::to_rows;
use lqgh_core::simulate::{ce_pipeline, mean_and_stderr, misspecified_pipeline, Simulator};
use lqgh_core::youla::{detuned_controller, youla_check as check, YoulaCheck};
use lqgh_core::{
    hardness_report, synthesize, CePipelineResult, Estimator, HardnessReport, ParametricFamily, PipelineConfig,
    ReportOptions,
};

use crate::source::{describe_policy, load_controller, load_instance, parse_grid, parse_policy, Instance};
use crate::{Format, InstanceArgs, OutputArgs, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;

fn emit(out: &OutputArgs, text: String) -> Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn only_json(out: &OutputArgs, command: &str) -> Result<()> {
    if out.format == Some(Format::Csv) {
        bail!("{command} only writes JSON");
    }
    Ok(())
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct Header<'a> {
    schema_version: u32,
    command: &'a str,
    instance: &'a str,
    theta: &'a [f64],
    policy: String,
}

fn header<'a>(command: &'a str, inst: &'a Instance, policy: String) -> Header<'a> {
    Header { schema_version: SCHEMA_VERSION, command, instance: &inst.label, theta: &inst.theta, policy }
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    /// Use the exact finite-horizon Fisher information instead of T times the rate.
    #[arg(long)]
    finite_t: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    #[serde(flatten)]
    report: HardnessReport,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    only_json(&a.out, "analyze")?;
    let inst = load_instance(&a.instance.instance, &a.instance.params)?;
    let policy = parse_policy(a.instance.policy.as_deref(), &inst.policy)?;
    let opts = ReportOptions { n: a.n, t: a.t, use_finite_t: a.finite_t, hessian_kind: inst.hessian_kind };
    let report = hardness_report(&inst.family, &inst.theta, &policy, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(&a.out, json(&AnalyzeOutput { header: header("analyze", &inst, describe_policy(&policy)), report })?)
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Values of the instance's sweep parameter: `a,b,c`, `log:LO:HI:COUNT` or `lin:LO:HI:COUNT`.
    #[arg(long)]
    grid: String,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    schema_version: u32,
    command: &'a str,
    instance: &'a str,
    sweep_param: &'a str,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    rows: &'a [SweepRow],
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let grid = parse_grid(&a.grid)?;
    let inst = load_instance(&a.instance.instance, &a.instance.params)?;
    let Some((name, params)) = &inst.catalog else {
        bail!("sweep needs a catalog instance");
    };
    let entry = instances::lookup(name, params)?;
    let policy = match a.instance.policy.as_deref() {
        Some(p) => Some(parse_policy(Some(p), &inst.policy)?),
        None => None,
    };
    let rows = instances::sweep(name, params, &grid, policy.as_ref(), a.n, a.t)?;
    let text = match a.out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            instances::write_sweep_csv(&rows, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => json(&SweepOutput {
            schema_version: SCHEMA_VERSION,
            command: "sweep",
            instance: name,
            sweep_param: entry.sweep_param,
            n: a.n,
            t: a.t,
            rows: &rows,
        })?,
    };
    emit(&a.out, text)
}

#[derive(Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long = "N", default_value_t = 50)]
    n: usize,
    #[arg(long = "T", default_value_t = 400)]
    t: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Estimate within the misspecified class `B = [theta; 1 + epsilon]` (Doyle instances only).
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Serialize)]
struct MonteCarloOutput<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    seed: u64,
    epsilon: Option<f64>,
    theta_true: f64,
    theta_hat_mean: f64,
    theta_hat_std_err: f64,
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "FI_finite_T")]
    fi_finite_t: f64,
    /// `tr(H FI^{-1}) / 2` with the per-trajectory information.
    half_trace_h_fi_inv: f64,
    /// `N * mean / half_trace_h_fi_inv`
    ratio: f64,
    #[serde(flatten)]
    result: &'a CePipelineResult,
}

pub fn montecarlo(a: MonteCarloArgs) -> Result<()> {
    let mut inst = load_instance(&a.instance.instance, &a.instance.params)?;
    if inst.family.dim() != 1 {
        bail!("montecarlo estimates a scalar parameter");
    }
    let policy = parse_policy(a.instance.policy.as_deref(), &inst.policy)?;
    let cfg = PipelineConfig { n: a.n, t: a.t, replicates: a.replicates, seed: a.seed, estimator: Estimator::Mle { bracket: inst.bracket } };
    let result = match a.epsilon {
        None => ce_pipeline(&inst.family, inst.theta[0], &policy, &cfg)?,
        Some(eps) => {
            let sigma = match &inst.catalog {
                Some((name, _)) if name == "doyle" || name == "doyle_misspecified" => {
                    instances::lookup(name, &inst.catalog.as_ref().unwrap().1)?.param("sigma").unwrap_or(0.25)
                }
                _ => bail!("--epsilon applies to the doyle catalog instances"),
            };
            let truth = instances::doyle_misspecified(sigma, 0.0)?;
            let model = instances::doyle_misspecified(sigma, eps)?;
            let cfg = PipelineConfig { estimator: Estimator::Mle { bracket: model.mle_bracket }, ..cfg };
            let r = misspecified_pipeline(&truth.family, 0.0, &model.family, &policy, &cfg)?;
            inst = Instance { label: format!("doyle_misspecified:sigma={sigma},epsilon={eps}"), ..inst };
            inst.family = truth.family;
            inst.theta = truth.theta_star;
            r
        }
    };
    let h = hessian_matrix(inst.hessian_kind, &inst.family, &inst.theta)?;
    let fi = fisher_matrix_finite_t(&inst.family, &inst.theta, &policy, a.t)?;
    let half = 0.5 * trace_h_fi_inv(&h, &fi)?;
    let (theta_hat_mean, theta_hat_std_err) = mean_and_stderr(&result.theta_hat);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let text = match a.out.format.unwrap_or(Format::Json) {
        Format::Json => json(&MonteCarloOutput {
            header: header("montecarlo", &inst, describe_policy(&policy)),
            seed: a.seed,
            epsilon: a.epsilon,
            theta_true: inst.theta[0],
            theta_hat_mean,
            theta_hat_std_err,
            h: h[(0, 0)],
            fi_finite_t: fi[(0, 0)],
            half_trace_h_fi_inv: half,
            ratio: a.n as f64 * result.mean / half,
            result: &result,
        })?,
        Format::Csv => {
            let mut s = String::from("replicate,theta_hat,excess\n");
            for (r, (th, ex)) in result.theta_hat.iter().zip(&result.excess).enumerate() {
                s += &format!("{r},{},{}\n", f(*th), ex.map(f).unwrap_or_default());
            }
            s
        }
    };
    emit(&a.out, text)
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long = "N", default_value_t = 1)]
    n: usize,
    #[arg(long = "T", default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Replicate index selecting the noise stream.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    #[command(flatten)]
    out: OutputArgs,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    if a.out.format == Some(Format::Json) {
        bail!("simulate only writes CSV");
    }
    let inst = load_instance(&a.instance.instance, &a.instance.params)?;
    let policy = parse_policy(a.instance.policy.as_deref(), &inst.policy)?;
    let plant = inst.family.eval(&inst.theta)?;
    let sol = synthesize(&plant)?;
    let sim = Simulator::new(&plant, &sol, &policy.resolve(&plant, &sol)?)?;
    let data = sim.dataset(a.n, a.t, a.seed, a.replicate)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    emit(&a.out, String::from_utf8(buf)?)
}

#[derive(Args)]
pub struct CodesignArgs {
    /// Catalog instance with a sensor parameter `s`.
    #[arg(long, default_value = "tradeoffs")]
    instance: String,
    /// Data budgets, comma-separated.
    #[arg(long = "N", value_delimiter = ',', default_values_t = [10.0, 100.0, 1000.0])]
    n: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    s_min: f64,
    #[arg(long, default_value_t = 20.0)]
    s_max: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Serialize)]
struct CodesignOutput<'a> {
    schema_version: u32,
    command: &'a str,
    instance: &'a str,
    bracket: (f64, f64),
    rows: &'a [CodesignResult],
    warnings: Vec<String>,
}

pub fn codesign(a: CodesignArgs) -> Result<()> {
    let (name, params) = instances::parse_spec(&a.instance)?;
    let entry = instances::lookup(&name, &params)?;
    if entry.param("s").is_none() {
        bail!("instance `{name}` has no sensor parameter s");
    }
    let family_of_s = |s: f64| {
        let mut p = params.clone();
        p.push(("s".into(), s));
        instances::lookup(&name, &p)
    };
    let rows: Vec<CodesignResult> =
        a.n.iter().map(|&n| codesign_minimize(&family_of_s, n, (a.s_min, a.s_max))).collect::<lqgh_core::Result<_>>()?;
    let warnings: Vec<String> = rows
        .iter()
        .filter(|r| r.at_boundary)
        .map(|r| format!("N = {}: minimizer {} at the bracket boundary", r.n, r.s_star))
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let text = match a.out.format.unwrap_or(Format::Json) {
        Format::Json => json(&CodesignOutput {
            schema_version: SCHEMA_VERSION,
            command: "codesign",
            instance: &a.instance,
            bracket: (a.s_min, a.s_max),
            rows: &rows,
            warnings,
        })?,
        Format::Csv => {
            let mut s = String::from("N,s_star,objective,at_boundary\n");
            for r in &rows {
                s += &format!("{},{},{},{}\n", f(r.n), f(r.s_star), f(r.objective), r.at_boundary);
            }
            s
        }
    };
    emit(&a.out, text)
}

#[derive(Args)]
pub struct YoulaArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Controller JSON `{"A", "B", "C", "D"}`; defaults to the detuned observer controller.
    #[arg(long)]
    controller: Option<String>,
    /// Scale of the state-feedback gain in the detuned controller.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Scale of the observer gain in the detuned controller.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Frequency grid size for the reconstruction residuals.
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Serialize)]
struct YoulaOutput<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    controller: String,
    #[serde(flatten)]
    check: YoulaCheck,
    #[serde(rename = "Q")]
    q: serde_json::Value,
}

pub fn youla_check(a: YoulaArgs) -> Result<()> {
    only_json(&a.out, "youla-check")?;
    let inst = load_instance(&a.instance.instance, &a.instance.params)?;
    let plant = inst.family.eval(&inst.theta)?;
    let sol = synthesize(&plant)?;
    let (k, label) = match &a.controller {
        Some(file) => (load_controller(file)?, file.clone()),
        None => (detuned_controller(&plant, &sol, a.alpha, a.beta), format!("detuned:alpha={},beta={}", a.alpha, a.beta)),
    };
    let result = check(&plant, &sol, &k, a.points.max(2))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let fac = lqgh_core::youla::coprime_factorization(&plant, &sol);
    let q = lqgh_core::youla::youla_parameter(&k, &fac, &plant)?.q;
    let q = serde_json::json!({"A": to_rows(&q.a), "B": to_rows(&q.b), "C": to_rows(&q.c), "D": to_rows(&q.d)});
    emit(&a.out, json(&YoulaOutput { header: header("youla-check", &inst, "n/a".into()), controller: label, check: result, q })?)
}
