use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

mod commands;

/// Weighted Dirichlet improvability under general norms.
#[derive(Debug, Parser)]
#[command(name = "dirichlet-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First minima of a_s Λ_A along a grid of flow times (CSV).
    Trajectory(TrajectoryArgs),
    /// Dirichlet-condition scan over a t grid (JSONL).
    Dirichlet(DirichletArgs),
    /// Finite-horizon badly-approximable score (JSON).
    BaScore(BaScoreArgs),
    /// Sample critical-locus lattices (JSONL).
    Locus(LocusArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Critical radius of a norm.
    CriticalRadius(CriticalRadiusArgs),
}

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct Common {
    /// JSON file of defaults; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Enumeration node budget (DIRICHLET_LAB_BUDGET overrides).
    #[arg(long)]
    budget: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MatrixArgs {
    /// Matrix A: inline rows `a,b;c,d` or a JSON file.
    #[arg(long = "A")]
    #[serde(rename = "A")]
    a: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Weights `α_1,…,α_m,β_1,…,β_n`, normalized to sum one per side.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    matrix: MatrixArgs,
    /// `sup`, `euclid`, `lp:<p>` or `cyl:<inner>`.
    #[arg(long)]
    norm: Option<String>,
    /// Flow times `lo:hi:step`.
    #[arg(long)]
    s: Option<String>,
    /// Probe radii, comma separated; defaults to fractions of r_ν.
    #[arg(long)]
    probe: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DirichletArgs {
    #[command(flatten)]
    #[serde(flatten)]
    matrix: MatrixArgs,
    /// `c/t:<c>` or `table:<t>=<ψ>,...`.
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    norm: Option<String>,
    /// `geom:<lo>:<hi>:<count>`, `lin:…` or `list:<t>,…`.
    #[arg(long)]
    tgrid: Option<String>,
    /// Radius to use instead of r_ν.
    #[arg(long)]
    radius: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    matrix: MatrixArgs,
    /// Height Q.
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    q: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LocusArgs {
    /// `hajos:<d>[:<perm>]`, `z1`, `z2` or `hex`.
    #[arg(long)]
    kind: Option<String>,
    /// Number of samples, seeds `seed, seed+1, …`.
    #[arg(long)]
    count: Option<u64>,
    /// Split of d into m + n for the divergence direction.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[arg(long)]
    samples: Option<usize>,
    /// `json` or `csv`; from the output extension when absent.
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CriticalRadiusArgs {
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

/// Missing or contradictory arguments; exits 64.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

const EXIT_DOMAIN: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn read_json(path: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path}"))
}

/// Non-null fields of `overlay` replace those of `base`.
pub fn merge(base: &mut Map<String, Value>, overlay: Value) {
    if let Value::Object(o) = overlay {
        for (k, v) in o {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `--config` under the parsed flags and logs the result.
fn resolve<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&str>, name: &str) -> Result<T> {
    let mut base = match config {
        Some(path) => match read_json(path)? {
            Value::Object(m) => m,
            _ => return Err(usage(format!("{path}: config must be a JSON object"))),
        },
        None => Map::new(),
    };
    merge(&mut base, serde_json::to_value(cli)?);
    let resolved: T = serde_json::from_value(Value::Object(base.clone()))
        .map_err(|e| usage(format!("bad config: {e}")))?;
    log_config(name, &Value::Object(base));
    Ok(resolved)
}

fn log_config(name: &str, v: &Value) {
    eprintln!("dirichlet-lab {name}: {v}");
}

/// Budget from the environment, then the flag, then the default.
pub fn budget(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var("DIRICHLET_LAB_BUDGET") {
        Ok(v) => {
            let b = v
                .trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("DIRICHLET_LAB_BUDGET must be an integer, got {v:?}")))?;
            Ok(Some(b))
        }
        Err(_) => Ok(flag),
    }
}

fn setup_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

/// Output sink for `--output`, or standard output.
pub fn open_output(path: Option<&str>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = Path::new(p).parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {p}"))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<commands::Status> {
    match cli.command {
        Command::Trajectory(a) => {
            let a = resolve(&a, a.common.config.as_deref(), "trajectory")?;
            setup_jobs(a.common.jobs)?;
            commands::trajectory(&a)
        }
        Command::Dirichlet(a) => {
            let a = resolve(&a, a.common.config.as_deref(), "dirichlet")?;
            setup_jobs(a.common.jobs)?;
            commands::dirichlet(&a)
        }
        Command::BaScore(a) => {
            let a = resolve(&a, a.common.config.as_deref(), "ba-score")?;
            commands::ba_score(&a)
        }
        Command::Locus(a) => {
            let a = resolve(&a, a.common.config.as_deref(), "locus")?;
            setup_jobs(a.common.jobs)?;
            commands::locus(&a)
        }
        Command::Experiment(a) => {
            setup_jobs(a.common.jobs)?;
            commands::experiment(&a)
        }
        Command::CriticalRadius(a) => {
            let a = resolve(&a, a.common.config.as_deref(), "critical-radius")?;
            commands::critical_radius(&a)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<dirichlet_lab::Error>() {
        Some(e) if e.is_budget() => EXIT_BUDGET,
        _ => EXIT_DOMAIN,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::BudgetFailures(k)) => {
            eprintln!("dirichlet-lab: {k} evaluation(s) exceeded the enumeration budget");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(e) => {
            eprintln!("dirichlet-lab: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
