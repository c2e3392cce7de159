//! The weighted diagonal flow `a_s` on the space of lattices.

mod dani;
mod diagnostics;

pub use dani::{
    c_from_radius, dani_convert, horizon_to_time, radius_from_c, time_to_horizon, DaniDirection,
};
pub use diagnostics::{
    ba_infimum, ba_score, ba_search, di_diagnostic, divergence_diagnostic, BaSearch,
    DiOptions, DiagnosticKind, DiagnosticReport, TailBehavior, Verdict,
    DEFAULT_DIVERGENCE_THRESHOLD,
};

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{lattice_from_matrix, Enumerator, Lattice, MatrixA};
use crate::norms::NormDescriptor;
use crate::weights::WeightVector;
use crate::EPS;

/// Probe radii as fractions of `r_ν`.
pub const DEFAULT_PROBE_FRACTIONS: [f64; 5] = [0.5, 0.8, 0.9, 0.95, 0.99];

pub const DEFAULT_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub weights: WeightVector,
    pub s: f64,
}

impl FlowParams {
    pub fn matrix(&self) -> DMatrix<f64> {
        flow_matrix(&self.weights, self.s)
    }
}

/// `a_s = diag(e^{sα_1}, …, e^{sα_m}, e^{−sβ_1}, …, e^{−sβ_n})`.
pub fn flow_matrix(w: &WeightVector, s: f64) -> DMatrix<f64> {
    let diag: Vec<f64> = w.flow_exponents().iter().map(|e| (s * e).exp()).collect();
    DMatrix::from_diagonal(&DVector::from_vec(diag))
}

/// `a_s · Λ`.
pub fn flow_lattice(lattice: &Lattice, w: &WeightVector, s: f64) -> Result<Lattice> {
    if lattice.dim() != w.d() {
        return Err(Error::DimensionMismatch {
            expected: w.d(),
            found: lattice.dim(),
        });
    }
    lattice.transformed(&flow_matrix(w, s))
}

/// `a_s · Λ_A`.
pub fn orbit_point(a: &MatrixA, w: &WeightVector, s: f64) -> Result<Lattice> {
    check_shape(a, w)?;
    flow_lattice(&lattice_from_matrix(a), w, s)
}

pub(crate) fn check_shape(a: &MatrixA, w: &WeightVector) -> Result<()> {
    if a.m() != w.m() || a.n() != w.n() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{} but weights are for {}x{}",
            a.m(),
            a.n(),
            w.m(),
            w.n()
        )));
    }
    Ok(())
}

/// Uniform grid `lo, lo + step, …` up to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidInput(format!(
            "bad grid {lo}:{hi}:{step}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| lo + k as f64 * step).collect())
}

/// Parses `lo:hi:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad grid {text:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [lo, hi, step] => uniform_grid(*lo, *hi, *step),
        [single] => Ok(vec![*single]),
        _ => Err(Error::InvalidInput(format!(
            "grid must be lo:hi:step, got {text:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub s: f64,
    pub lambda1: f64,
    /// Coefficients of the witness in the `u_A` basis, i.e. `(−p, q)`.
    pub coeffs: Vec<i64>,
    pub witness: Vec<f64>,
    /// `(r, λ₁ ≥ r)` per probe radius.
    pub admissible_at: Vec<(f64, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSample {
    pub s: f64,
    pub message: String,
    pub budget_exceeded: bool,
}

pub type TrajectoryPoint = std::result::Result<TrajectorySample, FailedSample>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOptions {
    pub probe_radii: Vec<f64>,
    pub enumerator: Enumerator,
}

impl TrajectoryOptions {
    /// Default probe radii `{0.5, 0.8, 0.9, 0.95, 0.99}·r_ν`.
    pub fn for_radius(r_nu: f64) -> Self {
        TrajectoryOptions {
            probe_radii: DEFAULT_PROBE_FRACTIONS.iter().map(|f| f * r_nu).collect(),
            enumerator: Enumerator::default(),
        }
    }
}

fn sample_at(
    base: &Lattice,
    w: &WeightVector,
    nu: &NormDescriptor,
    s: f64,
    opts: &TrajectoryOptions,
) -> TrajectoryPoint {
    let run = || -> Result<TrajectorySample> {
        let l = flow_lattice(base, w, s)?;
        let fm = opts.enumerator.first_minimum(&l, nu)?;
        let admissible_at = opts
            .probe_radii
            .iter()
            .map(|&r| (r, fm.value >= r - EPS))
            .collect();
        Ok(TrajectorySample {
            s,
            lambda1: fm.value,
            coeffs: fm.coeffs,
            witness: fm.witness,
            admissible_at,
        })
    };
    run().map_err(|e| FailedSample {
        s,
        budget_exceeded: e.is_budget(),
        message: e.to_string(),
    })
}

/// First minima of `a_s Λ` along a grid, for an arbitrary starting lattice.
pub fn lattice_trajectory(
    base: &Lattice,
    w: &WeightVector,
    nu: &NormDescriptor,
    s_grid: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryPoint>> {
    nu.check_dim(base.dim())?;
    if base.dim() != w.d() {
        return Err(Error::DimensionMismatch {
            expected: w.d(),
            found: base.dim(),
        });
    }
    if s_grid.iter().any(|s| !s.is_finite()) || s_grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidInput("s grid must be finite and sorted".into()));
    }
    Ok(s_grid
        .par_iter()
        .map(|&s| sample_at(base, w, nu, s, opts))
        .collect())
}

/// First minima of `a_s Λ_A` along `s_grid`. Budget failures mark the
/// sample as failed and the run continues.
pub fn trajectory(
    a: &MatrixA,
    w: &WeightVector,
    nu: &NormDescriptor,
    s_grid: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryPoint>> {
    check_shape(a, w)?;
    lattice_trajectory(&lattice_from_matrix(a), w, nu, s_grid, opts)
}

/// Writes trajectory rows as CSV:
/// `s,status,lambda1,coef_1..coef_d,vec_1..vec_d,adm_<r>...`.
pub fn write_trajectory_csv<W: Write>(
    points: &[TrajectoryPoint],
    d: usize,
    probe_radii: &[f64],
    out: W,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["s".to_string(), "status".into(), "lambda1".into()];
    header.extend((1..=d).map(|i| format!("coef_{i}")));
    header.extend((1..=d).map(|i| format!("vec_{i}")));
    header.extend(probe_radii.iter().map(|r| format!("adm_{r}")));
    wtr.write_record(&header)?;
    for p in points {
        let mut row = Vec::with_capacity(header.len());
        match p {
            Ok(smp) => {
                row.push(smp.s.to_string());
                row.push("ok".into());
                row.push(smp.lambda1.to_string());
                row.extend(smp.coeffs.iter().map(|c| c.to_string()));
                row.extend(smp.witness.iter().map(|c| c.to_string()));
                row.extend(smp.admissible_at.iter().map(|(_, a)| a.to_string()));
            }
            Err(f) => {
                row.push(f.s.to_string());
                row.push(if f.budget_exceeded { "budget" } else { "error" }.into());
                row.resize(header.len(), String::new());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Result of searching an orbit segment for a visit to `K_ν(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum OrbitEntry {
    /// `a_s Λ ∈ K_ν(r)` at this time.
    Enters { s: f64, lambda1: f64 },
    /// Certified: `λ₁(a_s Λ) < r` on the whole segment.
    Avoids,
    /// Refinement depth ran out near a tangency, or a sample failed.
    Undetermined,
}

const MAX_REFINE_DEPTH: u32 = 48;

/// Searches `s ∈ [s_lo, s_hi]` for the first time `a_s Λ ∈ K_ν(r)`.
///
/// Uses `λ₁(a_{s+h}Λ) ≤ e^{L|h|} λ₁(a_sΛ)` with `L` the largest weight, valid
/// for the coordinate-monotone norms supported here, to certify the gaps
/// between grid points.
pub fn orbit_entry(
    base: &Lattice,
    w: &WeightVector,
    nu: &NormDescriptor,
    r: f64,
    s_lo: f64,
    s_hi: f64,
    step: f64,
    en: &Enumerator,
) -> Result<OrbitEntry> {
    let grid = uniform_grid(s_lo, s_hi, step)?;
    let lip = w.max_weight();
    let lambda = |s: f64| -> Result<f64> { Ok(en.first_minimum(&flow_lattice(base, w, s)?, nu)?.value) };
    let inside = |v: f64| v >= r - EPS;

    let mut prev = (grid[0], lambda(grid[0])?);
    if inside(prev.1) {
        return Ok(OrbitEntry::Enters { s: prev.0, lambda1: prev.1 });
    }
    let mut points = grid[1..].to_vec();
    if points.last().is_none_or(|&l| l < s_hi - 1e-12) {
        points.push(s_hi);
    }
    for s in points {
        let v = lambda(s)?;
        match refine(&lambda, prev, (s, v), lip, r, 0)? {
            OrbitEntry::Avoids => {}
            other => return Ok(other),
        }
        if inside(v) {
            return Ok(OrbitEntry::Enters { s, lambda1: v });
        }
        prev = (s, v);
    }
    Ok(OrbitEntry::Avoids)
}

fn refine<F: Fn(f64) -> Result<f64>>(
    lambda: &F,
    (a, la): (f64, f64),
    (b, lb): (f64, f64),
    lip: f64,
    r: f64,
    depth: u32,
) -> Result<OrbitEntry> {
    let h = b - a;
    // the two cones e^{±L(s−·)} meet at x from a
    let x = ((h + (lb / la).ln() / lip) / 2.0).clamp(0.0, h);
    let bound = la * (lip * x).exp();
    if bound < r - EPS {
        return Ok(OrbitEntry::Avoids);
    }
    if depth >= MAX_REFINE_DEPTH {
        if lb >= r - EPS {
            return Ok(OrbitEntry::Enters { s: b, lambda1: lb });
        }
        return Ok(OrbitEntry::Undetermined);
    }
    let mid = a + h / 2.0;
    let lm = lambda(mid)?;
    let inside = |v: f64| v >= r - EPS;
    // a known inside endpoint is an entry even if the crossing before it
    // cannot be resolved in floating point
    match refine(lambda, (a, la), (mid, lm), lip, r, depth + 1)? {
        OrbitEntry::Avoids => {}
        OrbitEntry::Undetermined if inside(lm) => return Ok(OrbitEntry::Enters { s: mid, lambda1: lm }),
        other => return Ok(other),
    }
    if inside(lm) {
        return Ok(OrbitEntry::Enters { s: mid, lambda1: lm });
    }
    match refine(lambda, (mid, lm), (b, lb), lip, r, depth + 1)? {
        OrbitEntry::Undetermined if inside(lb) => Ok(OrbitEntry::Enters { s: b, lambda1: lb }),
        other => Ok(other),
    }
}
