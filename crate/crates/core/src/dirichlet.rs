//! Arithmetic and geometric checkers for the weighted Dirichlet condition.
//!
//! For `t > 1` the condition asks for `(p, q) ≠ 0` with
//! `(Aq − p, q) ∈ D_t B_ν(r_ν)`, `D_t = diag(ψ(t)^α, t^β)`. Both checkers
//! use strict inequalities padded by [`EPS`] toward non-solvability, so a
//! "solvable" answer survives small perturbations of the input.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::check_shape;
use crate::error::{Error, Result};
use crate::lattice::{is_canonical, witness_order, Enumerator, Lattice, MatrixA};
use crate::norms::{critical_radius, NormDescriptor};
use crate::weights::WeightVector;
use crate::EPS;

/// Default scan grid: 64 geometric points in `[2, 1000]`.
pub const DEFAULT_T_GRID: &str = "geom:2:1000:64";

/// An approximation function `ψ`, positive and nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFunction {
    /// `ψ(t) = c/t`.
    COverT { c: f64 },
    /// Linear interpolation between `(t, ψ)` samples; `t` outside the
    /// sampled range is an error.
    Tabulated { points: Vec<(f64, f64)> },
}

impl PsiFunction {
    pub fn c_over_t(c: f64) -> Result<Self> {
        let f = PsiFunction::COverT { c };
        f.validate()?;
        Ok(f)
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        let f = PsiFunction::Tabulated { points };
        f.validate()?;
        Ok(f)
    }

    /// `ψ₁(t) = 1/t`.
    pub fn psi1() -> Self {
        PsiFunction::COverT { c: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsiFunction::COverT { c } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
                }
            }
            PsiFunction::Tabulated { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidInput("empty ψ table".into()));
                }
                for &(t, v) in points {
                    if !(t.is_finite() && v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidInput(format!("bad ψ sample ({t}, {v})")));
                    }
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidInput("ψ table abscissae must increase".into()));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::InvalidInput("ψ table values must be nonincreasing".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            PsiFunction::COverT { c } => Ok(c / t),
            PsiFunction::Tabulated { points } => {
                let (t0, v0) = points[0];
                let (t1, v1) = points[points.len() - 1];
                if t < t0 - 1e-12 * t0.abs() || t > t1 + 1e-12 * t1.abs() {
                    return Err(Error::Domain(format!("t = {t} outside the ψ table [{t0}, {t1}]")));
                }
                if points.len() == 1 || t <= t0 {
                    return Ok(v0);
                }
                if t >= t1 {
                    return Ok(v1);
                }
                let k = points.partition_point(|&(x, _)| x <= t);
                let (xa, ya) = points[k - 1];
                let (xb, yb) = points[k];
                Ok(ya + (yb - ya) * (t - xa) / (xb - xa))
            }
        }
    }

    /// `c/t:<c>` or `table:<t>=<ψ>,<t>=<ψ>,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(c) = text.strip_prefix("c/t:") {
            let c = c
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad c in {text:?}: {e}")))?;
            return Self::c_over_t(c);
        }
        if let Some(rest) = text.strip_prefix("table:") {
            let points = rest
                .split(',')
                .map(|pair| {
                    let (t, v) = pair
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidInput(format!("bad ψ sample {pair:?}")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::InvalidInput(format!("bad ψ sample {pair:?}: {e}")))
                    };
                    Ok((parse(t)?, parse(v)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::tabulated(points);
        }
        Err(Error::InvalidInput(format!(
            "unknown ψ {text:?}; expected c/t:<c> or table:<t>=<v>,..."
        )))
    }
}

/// A solution `(p, q)` of the coordinate-wise system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
}

fn nearest(x: f64) -> i64 {
    x.round() as i64
}

/// Largest integer `k ≥ 0` with `k < bound − EPS`, or `None` if even `0` fails.
fn strict_floor(bound: f64) -> Option<i64> {
    let b = bound - EPS;
    if b <= 0.0 {
        return None;
    }
    let k = b.ceil() as i64 - 1;
    Some(k.max(0))
}

/// Scans every `q ≠ 0` (up to sign) with `|q_j| < t^{β_j}` for a `p` with
/// `|A_i·q − p_i| < ψ_t^{α_i}`, taking `p_i` as the nearest integer.
///
/// Candidates are visited in order of increasing `max |q_j|`, then smallest
/// `ℓ¹` size, then colexicographically.
pub fn solve_weighted_system(
    a: &MatrixA,
    t: f64,
    psi_t: f64,
    w: &WeightVector,
    budget: u64,
) -> Result<Option<Witness>> {
    check_shape(a, w)?;
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must exceed 1, got {t}")));
    }
    if !(psi_t > 0.0 && psi_t.is_finite()) {
        return Err(Error::Domain(format!("ψ(t) must be positive, got {psi_t}")));
    }
    let n = a.n();
    let mut bounds = Vec::with_capacity(n);
    for b in w.beta() {
        match strict_floor(t.powf(*b)) {
            Some(k) => bounds.push(k),
            None => return Ok(None),
        }
    }
    let size = bounds
        .iter()
        .try_fold(1u64, |acc, &b| acc.checked_mul(2 * b as u64 + 1));
    match size {
        Some(s) if s <= budget => {}
        _ => {
            return Err(Error::BudgetExceeded {
                budget,
                best_upper_bound: None,
            })
        }
    }
    let targets: Vec<f64> = w.alpha().iter().map(|al| psi_t.powf(*al) - EPS).collect();
    let shell_max = bounds.iter().copied().max().unwrap_or(0);
    for shell in 1..=shell_max {
        for q in shell_candidates(&bounds, shell) {
            let aq = a.apply(&q);
            if aq.iter().zip(&targets).all(|(x, tg)| (x - x.round()).abs() < *tg) {
                return Ok(Some(Witness {
                    p: aq.iter().map(|x| nearest(*x)).collect(),
                    q,
                }));
            }
        }
    }
    Ok(None)
}

/// Canonical `q` with `max |q_j| = shell` inside the box, in witness order.
fn shell_candidates(bounds: &[i64], shell: i64) -> Vec<Vec<i64>> {
    let n = bounds.len();
    let lim: Vec<i64> = bounds.iter().map(|&b| b.min(shell)).collect();
    let mut q: Vec<i64> = lim.iter().map(|l| -l).collect();
    let mut out = Vec::new();
    loop {
        if q.iter().any(|c| c.abs() == shell) && is_canonical(&q) {
            out.push(q.clone());
        }
        let mut k = 0;
        while k < n {
            if q[k] < lim[k] {
                q[k] += 1;
                break;
            }
            q[k] = -lim[k];
            k += 1;
        }
        if k == n {
            break;
        }
    }
    out.sort_by(|a, b| witness_order(a, b));
    out
}

/// Re-checks the coordinate-wise strict inequalities without padding.
pub fn verify_arithmetic(a: &MatrixA, t: f64, psi_t: f64, w: &WeightVector, wit: &Witness) -> bool {
    if wit.p.len() != a.m() || wit.q.len() != a.n() || wit.q.iter().all(|&c| c == 0) {
        return false;
    }
    let aq = a.apply(&wit.q);
    let rows = aq
        .iter()
        .zip(&wit.p)
        .zip(w.alpha())
        .all(|((x, &p), al)| (x - p as f64).abs() < psi_t.powf(*al));
    let cols = wit
        .q
        .iter()
        .zip(w.beta())
        .all(|(&q, b)| (q.abs() as f64) < t.powf(*b));
    rows && cols
}

/// Which kind of lattice point made the geometric condition hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Some point with `q ≠ 0` lies in the body.
    QNonzero,
    /// Only points with `q = 0, p ≠ 0` lie in the body.
    QZeroOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricOutcome {
    pub t: f64,
    pub psi_t: f64,
    pub solvable: bool,
    /// `λ₁(D_t⁻¹ Λ_A, ν)`.
    pub lambda1: f64,
    /// The radius compared against, `r_ν` or a supplied lower bound.
    pub radius: f64,
    pub branch: Option<Branch>,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Radius used instead of `r_ν`, e.g. an estimate-mode lower bound.
    pub radius: Option<f64>,
    pub enumerator: Enumerator,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            radius: None,
            enumerator: Enumerator::default(),
        }
    }
}

/// `κ·D_t⁻¹ u_A` with `κ = (ψ t)^{1/d}` so the basis is unimodular.
fn skewed_lattice(a: &MatrixA, t: f64, psi_t: f64, w: &WeightVector) -> Result<(Lattice, f64)> {
    let d = a.d();
    let kappa = (psi_t * t).powf(1.0 / d as f64);
    let scale: Vec<f64> = w
        .alpha()
        .iter()
        .map(|al| psi_t.powf(-al))
        .chain(w.beta().iter().map(|b| t.powf(-b)))
        .map(|x| x * kappa)
        .collect();
    let u = a.unipotent();
    let g = DMatrix::from_fn(d, d, |i, j| scale[i] * u[(i, j)]);
    Ok((Lattice::normalized(g)?, kappa))
}

/// Coefficients `(x, y)` of `u_A` map to `p = −x`, `q = y`; the sign is
/// fixed so that `q` (or `p` when `q = 0`) has a positive first entry.
fn witness_from_coeffs(m: usize, coeffs: &[i64]) -> Witness {
    let mut p: Vec<i64> = coeffs[..m].iter().map(|x| -x).collect();
    let mut q: Vec<i64> = coeffs[m..].to_vec();
    let lead = q.iter().chain(&p).copied().find(|&c| c != 0).unwrap_or(1);
    if lead < 0 {
        p.iter_mut().for_each(|c| *c = -*c);
        q.iter_mut().for_each(|c| *c = -*c);
    }
    Witness { p, q }
}

/// Tests whether `Λ_A` meets `D_t B_ν(r)` away from the origin.
///
/// Holds iff `λ₁(D_t⁻¹ Λ_A, ν) < r − EPS`. When the minimal vector has
/// `q = 0` the ball is searched for a `q ≠ 0` point too, so the reported
/// branch says whether the coordinate-wise system is solvable as well.
pub fn geometric_check(
    a: &MatrixA,
    t: f64,
    psi: &PsiFunction,
    w: &WeightVector,
    nu: &NormDescriptor,
    opts: &CheckOptions,
) -> Result<GeometricOutcome> {
    check_shape(a, w)?;
    nu.check_dim(a.d())?;
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must exceed 1, got {t}")));
    }
    let psi_t = psi.eval(t)?;
    let radius = match opts.radius {
        Some(r) => r,
        None => critical_radius(nu)?.value,
    };
    let (lat, kappa) = skewed_lattice(a, t, psi_t, w)?;
    let en = &opts.enumerator;
    let fm = en.first_minimum(&lat, nu)?;
    let lambda1 = fm.value / kappa;
    let mut out = GeometricOutcome {
        t,
        psi_t,
        solvable: false,
        lambda1,
        radius,
        branch: None,
        witness: None,
    };
    if lambda1 >= radius - EPS {
        return Ok(out);
    }
    out.solvable = true;
    let m = a.m();
    let wit = witness_from_coeffs(m, &fm.coeffs);
    if wit.q.iter().any(|&c| c != 0) {
        out.branch = Some(Branch::QNonzero);
        out.witness = Some(wit);
        return Ok(out);
    }
    // the minimum has q = 0; look for any q ≠ 0 point in the body
    let (c_lo, _) = nu.sandwich();
    let limit = kappa * (radius - EPS);
    let ball = en.enumerate_in_ball(&lat, limit / c_lo * (1.0 + EPS) + EPS)?;
    let other = ball
        .vectors
        .iter()
        .filter(|v| v.coeffs[m..].iter().any(|&c| c != 0))
        .map(|v| (nu.value(&v.point), v))
        .filter(|(val, _)| *val < limit)
        .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    match other {
        Some((_, v)) => {
            out.branch = Some(Branch::QNonzero);
            out.witness = Some(witness_from_coeffs(m, &v.coeffs));
        }
        None => {
            out.branch = Some(Branch::QZeroOnly);
            out.witness = Some(wit);
        }
    }
    Ok(out)
}

/// `ν(D_t⁻¹ (Aq − p, q)) < r`, without padding.
pub fn verify_geometric(
    a: &MatrixA,
    t: f64,
    psi_t: f64,
    w: &WeightVector,
    nu: &NormDescriptor,
    radius: f64,
    wit: &Witness,
) -> bool {
    if wit.p.len() != a.m() || wit.q.len() != a.n() {
        return false;
    }
    if wit.p.iter().chain(&wit.q).all(|&c| c == 0) {
        return false;
    }
    let aq = a.apply(&wit.q);
    let x: Vec<f64> = aq
        .iter()
        .zip(&wit.p)
        .zip(w.alpha())
        .map(|((v, &p), al)| (v - p as f64) / psi_t.powf(*al))
        .chain(wit.q.iter().zip(w.beta()).map(|(&q, b)| q as f64 / t.powf(*b)))
        .collect();
    nu.value(&x) < radius
}

/// Parses `geom:<lo>:<hi>:<count>`, `lin:<lo>:<hi>:<count>` or
/// `list:<t>,<t>,...`.
pub fn parse_t_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::InvalidInput(format!("bad t grid {text:?}: {msg}"));
    let grid = if let Some(list) = text.strip_prefix("list:") {
        list.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
            .collect::<Result<Vec<_>>>()?
    } else {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 4 {
            return Err(bad("expected <kind>:<lo>:<hi>:<count>"));
        }
        let lo: f64 = parts[1].parse().map_err(|_| bad("lo"))?;
        let hi: f64 = parts[2].parse().map_err(|_| bad("hi"))?;
        let count: usize = parts[3].parse().map_err(|_| bad("count"))?;
        if count < 2 || !(hi > lo) {
            return Err(bad("need count ≥ 2 and hi > lo"));
        }
        match parts[0] {
            "geom" => {
                if lo <= 0.0 {
                    return Err(bad("geometric grid needs lo > 0"));
                }
                let ratio = (hi / lo).ln() / (count - 1) as f64;
                (0..count)
                    .map(|k| if k + 1 == count { hi } else { lo * (ratio * k as f64).exp() })
                    .collect()
            }
            "lin" => {
                let step = (hi - lo) / (count - 1) as f64;
                (0..count)
                    .map(|k| if k + 1 == count { hi } else { lo + step * k as f64 })
                    .collect()
            }
            other => return Err(bad(&format!("unknown kind {other:?}"))),
        }
    };
    check_t_grid(&grid)?;
    Ok(grid)
}

pub fn default_t_grid() -> Vec<f64> {
    parse_t_grid(DEFAULT_T_GRID).expect("default grid parses")
}

fn check_t_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty t grid".into()));
    }
    if !(grid[0] > 1.0) {
        return Err(Error::InvalidInput(format!("t grid must start above 1, got {}", grid[0])));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("t grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    Solvable,
    Unsolvable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub t: f64,
    pub status: ScanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default)]
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "summary", rename_all = "kebab-case")]
pub enum ScanSummary {
    AllSolvable,
    FirstFailureAt { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletVerdict {
    pub radius: f64,
    pub entries: Vec<ScanEntry>,
    pub summary: ScanSummary,
    /// Smallest grid `t` from which every later entry is solvable.
    pub solvable_from: Option<f64>,
}

impl DirichletVerdict {
    pub fn t_grid(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.t).collect()
    }

    pub fn all_solvable(&self) -> bool {
        self.summary == ScanSummary::AllSolvable
    }
}

/// Runs [`geometric_check`] at every grid point, in parallel.
pub fn scan_dirichlet(
    a: &MatrixA,
    psi: &PsiFunction,
    w: &WeightVector,
    nu: &NormDescriptor,
    t_grid: &[f64],
    opts: &CheckOptions,
) -> Result<DirichletVerdict> {
    check_shape(a, w)?;
    nu.check_dim(a.d())?;
    psi.validate()?;
    check_t_grid(t_grid)?;
    let radius = match opts.radius {
        Some(r) => r,
        None => critical_radius(nu)?.value,
    };
    let opts = CheckOptions {
        radius: Some(radius),
        ..*opts
    };
    let entries: Vec<ScanEntry> = t_grid
        .par_iter()
        .map(|&t| match geometric_check(a, t, psi, w, nu, &opts) {
            Ok(o) => ScanEntry {
                t,
                status: if o.solvable {
                    ScanStatus::Solvable
                } else {
                    ScanStatus::Unsolvable
                },
                psi_t: Some(o.psi_t),
                lambda1: Some(o.lambda1),
                branch: o.branch,
                witness: o.witness,
                message: None,
                budget_exceeded: false,
            },
            Err(e) => ScanEntry {
                t,
                status: ScanStatus::Error,
                psi_t: None,
                lambda1: None,
                branch: None,
                witness: None,
                message: Some(e.to_string()),
                budget_exceeded: e.is_budget(),
            },
        })
        .collect();
    let summary = match entries.iter().find(|e| e.status != ScanStatus::Solvable) {
        None => ScanSummary::AllSolvable,
        Some(e) => ScanSummary::FirstFailureAt { t: e.t },
    };
    let solvable_from = entries
        .iter()
        .rposition(|e| e.status != ScanStatus::Solvable)
        .map_or(Some(entries[0].t), |k| entries.get(k + 1).map(|e| e.t));
    Ok(DirichletVerdict {
        radius,
        entries,
        summary,
        solvable_from,
    })
}

/// One JSON object per grid point, then one summary object.
pub fn write_verdict_jsonl<W: Write>(verdict: &DirichletVerdict, mut out: W) -> Result<()> {
    for e in &verdict.entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    let mut summary = match serde_json::to_value(verdict.summary)? {
        serde_json::Value::Object(m) => m,
        _ => serde_json::Map::new(),
    };
    summary.insert("radius".into(), verdict.radius.into());
    summary.insert("solvable_from".into(), serde_json::to_value(verdict.solvable_from)?);
    serde_json::to_writer(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}
