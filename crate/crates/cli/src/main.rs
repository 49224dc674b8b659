//! `lqgh`: hardness analysis, sweeps, Monte Carlo validation, sensor co-design
//! and Youla checks for LQG learning problems.

mod commands;
mod source;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Parser)]
#[command(name = "lqgh", version, about = "How hard is it to learn an LQG controller from offline data?")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hessian, Fisher information and the excess-cost lower bound at one point.
    Analyze(commands::AnalyzeArgs),
    /// Hardness quantities along a grid of a catalog parameter.
    Sweep(commands::SweepArgs),
    /// Certainty-equivalence excess cost over seeded replicates.
    Montecarlo(commands::MonteCarloArgs),
    /// Export simulated exploration data as CSV.
    Simulate(commands::SimulateArgs),
    /// Sensor parameter minimizing control cost plus learning cost.
    Codesign(commands::CodesignArgs),
    /// Coprime-factorization and Youla excess-cost residuals for a controller.
    YoulaCheck(commands::YoulaArgs),
}

#[derive(Args, Clone)]
pub struct InstanceArgs {
    /// Catalog spec `name[:key=value,...]` or path to an instance JSON file.
    #[arg(long)]
    instance: String,
    /// Catalog parameter override `key=value`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Exploration policy: optimal | static | static:FILE | custom:FILE, with optional +noise:ETA.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args, Clone)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let domain = err
        .chain()
        .filter_map(|e| e.downcast_ref::<lqgh_core::Error>())
        .any(|e| e.is_domain_signal());
    if domain {
        2
    } else {
        1
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LQGH_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("LQGH_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("LQGH_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = configure_threads().and_then(|()| match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Montecarlo(a) => commands::montecarlo(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Codesign(a) => commands::codesign(a),
        Command::YoulaCheck(a) => commands::youla_check(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
