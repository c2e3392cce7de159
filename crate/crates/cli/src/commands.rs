use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use dirichlet_lab::dirichlet::{
    parse_t_grid, scan_dirichlet, write_verdict_jsonl, CheckOptions, PsiFunction, DEFAULT_T_GRID,
};
use dirichlet_lab::dynamics::{
    ba_search, parse_grid, trajectory as run_trajectory, write_trajectory_csv, TrajectoryOptions,
};
use dirichlet_lab::experiments::{run_experiment, write_report, ExperimentConfig, ReportFormat};
use dirichlet_lab::loci::{
    divergence_direction, locus_membership, locus_membership_at, sample_locus, LocusDescriptor,
};
use dirichlet_lab::norms::{critical_radius_exact, critical_radius_with, CriticalRadius, EstimateConfig};
use dirichlet_lab::{Enumerator, MatrixA, NormDescriptor, WeightVector};

use crate::{
    budget, merge, open_output, usage, BaScoreArgs, Common, CriticalRadiusArgs, DirichletArgs,
    ExperimentArgs, LocusArgs, MatrixArgs, TrajectoryArgs,
};

const DEFAULT_BA_BUDGET: u64 = 100_000_000;

pub enum Status {
    Ok,
    BudgetFailures(usize),
}

fn enumerator(common: &Common) -> Result<Enumerator> {
    Ok(budget(common.budget)?.map_or_else(Enumerator::default, Enumerator::with_budget))
}

fn load_matrix(args: &MatrixArgs) -> Result<MatrixA> {
    let text = args.a.as_deref().ok_or_else(|| usage("--A is required"))?;
    let a = if Path::new(text).is_file() {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(text)?)
            .with_context(|| format!("parsing {text}"))?;
        match v {
            Value::Number(x) => MatrixA::scalar(x.as_f64().unwrap_or(f64::NAN))?,
            Value::Array(_) => MatrixA::from_rows(&serde_json::from_value::<Vec<Vec<f64>>>(v)?)?,
            other => {
                let a: MatrixA = serde_json::from_value(other)?;
                MatrixA::new(a.m(), a.n(), a.entries().to_vec())?
            }
        }
    } else {
        MatrixA::parse_inline(text)?
    };
    if args.m.is_some_and(|m| m != a.m()) || args.n.is_some_and(|n| n != a.n()) {
        return Err(usage(format!(
            "--m/--n do not match the {}x{} matrix",
            a.m(),
            a.n()
        )));
    }
    Ok(a)
}

fn load_weights(args: &MatrixArgs, a: &MatrixA) -> Result<WeightVector> {
    Ok(match &args.weights {
        Some(w) => WeightVector::parse(w, a.m(), a.n())?,
        None => WeightVector::uniform(a.m(), a.n()),
    })
}

/// `r_ν`, running the seeded estimate when no exact value is known.
fn radius(nu: &NormDescriptor, common: &Common, en: Enumerator) -> Result<CriticalRadius> {
    if let Some(r) = critical_radius_exact(nu) {
        return Ok(r);
    }
    let seed = common
        .seed
        .ok_or_else(|| usage("this norm has no exact critical radius; the estimate needs --seed"))?;
    Ok(critical_radius_with(
        nu,
        &EstimateConfig {
            seed,
            enumerator: en,
            ..EstimateConfig::default()
        },
    )?)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| usage(format!("bad number {t:?}: {e}"))))
        .collect()
}

pub fn trajectory(args: &TrajectoryArgs) -> Result<Status> {
    let a = load_matrix(&args.matrix)?;
    let w = load_weights(&args.matrix, &a)?;
    let nu = NormDescriptor::parse(args.norm.as_deref().unwrap_or("sup"), a.d())?;
    let grid = parse_grid(args.s.as_deref().unwrap_or("0:12:0.25"))?;
    let en = enumerator(&args.common)?;
    let probe_radii = match &args.probe {
        Some(p) => parse_list(p)?,
        None => TrajectoryOptions::for_radius(radius(&nu, &args.common, en)?.value).probe_radii,
    };
    let opts = TrajectoryOptions {
        probe_radii,
        enumerator: en,
    };
    let pts = run_trajectory(&a, &w, &nu, &grid, &opts)?;
    let mut out = open_output(args.common.output.as_deref())?;
    write_trajectory_csv(&pts, a.d(), &opts.probe_radii, &mut out)?;
    out.flush()?;
    let budget_failures = pts
        .iter()
        .filter(|p| p.as_ref().is_err_and(|f| f.budget_exceeded))
        .count();
    Ok(if budget_failures > 0 {
        Status::BudgetFailures(budget_failures)
    } else {
        Status::Ok
    })
}

pub fn dirichlet(args: &DirichletArgs) -> Result<Status> {
    let a = load_matrix(&args.matrix)?;
    let w = load_weights(&args.matrix, &a)?;
    let nu = NormDescriptor::parse(args.norm.as_deref().unwrap_or("sup"), a.d())?;
    let psi = PsiFunction::parse(args.psi.as_deref().unwrap_or("c/t:1.0"))?;
    let grid = parse_t_grid(args.tgrid.as_deref().unwrap_or(DEFAULT_T_GRID))?;
    let en = enumerator(&args.common)?;
    let r = match args.radius {
        Some(r) => r,
        None => radius(&nu, &args.common, en)?.value,
    };
    let opts = CheckOptions {
        radius: Some(r),
        enumerator: en,
    };
    let verdict = scan_dirichlet(&a, &psi, &w, &nu, &grid, &opts)?;
    let mut out = open_output(args.common.output.as_deref())?;
    write_verdict_jsonl(&verdict, &mut out)?;
    out.flush()?;
    let k = verdict.entries.iter().filter(|e| e.budget_exceeded).count();
    Ok(if k > 0 { Status::BudgetFailures(k) } else { Status::Ok })
}

pub fn ba_score(args: &BaScoreArgs) -> Result<Status> {
    let a = load_matrix(&args.matrix)?;
    let w = load_weights(&args.matrix, &a)?;
    let q = args.q.ok_or_else(|| usage("--Q is required"))?;
    let b = budget(args.common.budget)?.unwrap_or(DEFAULT_BA_BUDGET);
    let res = ba_search(&a, &w, q, b)?;
    let mut out = open_output(args.common.output.as_deref())?;
    let v = json!({
        "Q": q,
        "score": res.tail,
        "score_q": res.tail_q,
        "infimum": res.infimum,
        "infimum_q": res.infimum_q,
        "visited": res.visited,
    });
    serde_json::to_writer(&mut out, &v)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(Status::Ok)
}

pub fn locus(args: &LocusArgs) -> Result<Status> {
    let desc = LocusDescriptor::parse(args.kind.as_deref().ok_or_else(|| usage("--kind is required"))?)?;
    let seed = args.common.seed.ok_or_else(|| usage("locus sampling needs --seed"))?;
    let count = args.count.unwrap_or(1);
    let d = desc.dim();
    let m = args.m.unwrap_or(match desc {
        LocusDescriptor::CylindricalZ1 | LocusDescriptor::CylindricalZ2 => 2,
        _ => 1,
    });
    if m == 0 || m >= d {
        return Err(usage(format!("--m must lie in 1..{d}")));
    }
    let w = WeightVector::uniform(m, d - m);
    let nu = desc.norm();
    let en = enumerator(&args.common)?;
    let r = radius(&nu, &args.common, en)?;
    let mut out = open_output(args.common.output.as_deref())?;
    for k in 0..count {
        let sample = sample_locus(&desc, seed.wrapping_add(k))?;
        let fm = en.first_minimum(&sample.lattice, &nu)?;
        let member = if r.is_exact() {
            locus_membership(&sample.lattice, &nu, &en)?
        } else {
            locus_membership_at(&sample.lattice, &nu, r.value, &en)?
        };
        let direction = divergence_direction(&sample.lattice, &w, &desc).ok();
        let mut rec = match serde_json::to_value(&sample)? {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        rec.insert("lambda1".into(), json!(fm.value));
        rec.insert("radius".into(), serde_json::to_value(r)?);
        rec.insert("member".into(), json!(member));
        rec.insert("direction".into(), serde_json::to_value(direction)?);
        serde_json::to_writer(&mut out, &Value::Object(rec))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(Status::Ok)
}

pub fn experiment(args: &ExperimentArgs) -> Result<Status> {
    let path = args
        .common
        .config
        .as_deref()
        .ok_or_else(|| usage("experiment needs --config <file>"))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let mut base = match serde_json::from_str::<Value>(&text).with_context(|| format!("parsing {path}"))? {
        Value::Object(m) => m,
        _ => return Err(usage(format!("{path}: config must be a JSON object"))),
    };
    merge(
        &mut base,
        json!({
            "seed": args.common.seed,
            "samples": args.samples,
            "budget": budget(args.common.budget)?,
            "output": args.common.output,
        }),
    );
    if !base.contains_key("seed") {
        return Err(usage("experiments need a seed (--seed or \"seed\" in the config)"));
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("bad experiment config: {e}")))?;
    eprintln!("dirichlet-lab experiment: {}", serde_json::to_string(&cfg)?);
    let report = run_experiment(&cfg)?;
    let format = match &args.format {
        Some(f) => ReportFormat::parse(f)?,
        None => cfg.output.as_deref().map_or(ReportFormat::Json, ReportFormat::from_path),
    };
    let mut out = open_output(cfg.output.as_deref())?;
    write_report(&report, format, &mut out)?;
    out.flush()?;
    for c in &report.criteria {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(Status::Ok)
}

pub fn critical_radius(args: &CriticalRadiusArgs) -> Result<Status> {
    let d = args.d.ok_or_else(|| usage("--d is required"))?;
    let nu = NormDescriptor::parse(args.norm.as_deref().ok_or_else(|| usage("--norm is required"))?, d)?;
    let r = radius(&nu, &args.common, enumerator(&args.common)?)?;
    let mut out = open_output(args.common.output.as_deref())?;
    let status = if r.is_exact() { "exact" } else { "lower-bound" };
    writeln!(out, "{} {status}", r.value)?;
    out.flush()?;
    Ok(Status::Ok)
}
