//! Finite-horizon diagnostics for Dirichlet improvability, bad
//! approximability and singularity.
//!
//! All three properties are limits as `s → ∞`; every verdict here only
//! speaks about the window it was computed on.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_shape, trajectory, uniform_grid, TrajectoryOptions, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::lattice::{Enumerator, MatrixA};
use crate::norms::{critical_radius, quasi_norm, NormDescriptor};
use crate::weights::WeightVector;
use crate::EPS;

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 0.05;
const DEFAULT_BA_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    #[serde(rename = "DI")]
    Di,
    #[serde(rename = "BA")]
    Ba,
    #[serde(rename = "Sing")]
    Sing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailBehavior {
    Divergent,
    BoundedAway,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub kind: DiagnosticKind,
    pub window: (f64, f64),
    /// Max tail `λ₁` for DI, min `λ₁` for the divergence classifier.
    pub statistic: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<TailBehavior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub failed_samples: usize,
}

impl DiagnosticReport {
    pub fn horizon(&self) -> f64 {
        self.window.1
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Di => "DI",
            DiagnosticKind::Ba => "BA",
            DiagnosticKind::Sing => "Sing",
        };
        let v = match self.verdict {
            Verdict::Consistent => "consistent with",
            Verdict::Inconsistent => "inconsistent with",
            Verdict::Inconclusive => "inconclusive for",
        };
        write!(f, "{v} {kind} at horizon S={} (statistic {:.6})", self.horizon(), self.statistic)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiOptions {
    /// Margin below `r_ν` as a fraction of `r_ν`.
    pub margin_fraction: f64,
    /// Overrides the registry/estimate value of `r_ν`.
    pub r_nu: Option<f64>,
    pub enumerator: Enumerator,
}

impl Default for DiOptions {
    fn default() -> Self {
        DiOptions {
            margin_fraction: 0.02,
            r_nu: None,
            enumerator: Enumerator::default(),
        }
    }
}

/// DI is equivalent to the tail of `λ₁(a_s Λ_A)` staying below `r_ν`. The
/// statistic is the max of `λ₁` over the second half of the window.
pub fn di_diagnostic(
    a: &MatrixA,
    w: &WeightVector,
    nu: &NormDescriptor,
    window: (f64, f64),
    probe_count: usize,
    opts: &DiOptions,
) -> Result<DiagnosticReport> {
    let (lo, hi) = window;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::InvalidInput(format!("window must satisfy 0 < s_lo < s_hi, got {window:?}")));
    }
    if probe_count < 2 {
        return Err(Error::InvalidInput("need at least two probes".into()));
    }
    let r_nu = match opts.r_nu {
        Some(r) => r,
        None => critical_radius(nu)?.value,
    };
    let step = (hi - lo) / (probe_count - 1) as f64;
    let grid: Vec<f64> = (0..probe_count).map(|k| lo + k as f64 * step).collect();
    let topts = TrajectoryOptions {
        probe_radii: vec![r_nu],
        enumerator: opts.enumerator,
    };
    let pts = trajectory(a, w, nu, &grid, &topts)?;
    let mid = (lo + hi) / 2.0;
    let tail: Vec<&TrajectoryPoint> = pts
        .iter()
        .filter(|p| match p {
            Ok(s) => s.s >= mid,
            Err(f) => f.s >= mid,
        })
        .collect();
    let failed = tail.iter().filter(|p| p.is_err()).count();
    let statistic = tail
        .iter()
        .filter_map(|p| p.as_ref().ok())
        .map(|s| s.lambda1)
        .fold(0.0, f64::max);
    let margin = opts.margin_fraction * r_nu;
    let verdict = if statistic >= r_nu - EPS {
        Verdict::Inconsistent
    } else if failed > 0 {
        Verdict::Inconclusive
    } else if statistic < r_nu - margin {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    Ok(DiagnosticReport {
        kind: DiagnosticKind::Di,
        window,
        statistic,
        verdict,
        behavior: None,
        slope: None,
        failed_samples: failed,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Classifies the forward tail of a trajectory as divergent (Sing-like) or
/// bounded away from the cusp (BA-like).
///
/// Divergent: the last tail sample is below `threshold` and the fitted slope
/// of `log λ₁` on the tail is negative. Bounded-away: every sample is at least
/// `threshold`.
pub fn divergence_diagnostic(points: &[TrajectoryPoint], threshold: f64) -> Result<DiagnosticReport> {
    let ok: Vec<_> = points.iter().filter_map(|p| p.as_ref().ok()).collect();
    let failed = points.len() - ok.len();
    if ok.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "divergence diagnostic needs at least 10 samples, got {}",
            ok.len()
        )));
    }
    let lo = ok.first().map(|s| s.s).unwrap_or(0.0);
    let hi = ok.last().map(|s| s.s).unwrap_or(0.0);
    let half = ok.len() / 2;
    let tail = &ok[half..];
    let xs: Vec<f64> = tail.iter().map(|s| s.s).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.lambda1.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let min = ok.iter().map(|s| s.lambda1).fold(f64::INFINITY, f64::min);
    let last = tail.last().map(|s| s.lambda1).unwrap_or(f64::NAN);

    let behavior = if last < threshold && slope < 0.0 {
        TailBehavior::Divergent
    } else if min >= threshold {
        TailBehavior::BoundedAway
    } else {
        TailBehavior::Inconclusive
    };
    let (kind, verdict) = match behavior {
        TailBehavior::Divergent => (DiagnosticKind::Sing, Verdict::Consistent),
        TailBehavior::BoundedAway => (DiagnosticKind::Ba, Verdict::Consistent),
        TailBehavior::Inconclusive => (DiagnosticKind::Sing, Verdict::Inconclusive),
    };
    Ok(DiagnosticReport {
        kind,
        window: (lo, hi),
        statistic: min,
        verdict,
        behavior: Some(behavior),
        slope: Some(slope),
        failed_samples: failed,
    })
}

/// Outcome of the BA product search `‖Aq − p‖_α ‖q‖_β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaSearch {
    /// Minimum over `0 < ‖q‖_β ≤ Q`.
    pub infimum: f64,
    pub infimum_q: Vec<i64>,
    /// Minimum over the tail window `Q^{1/2} ≤ ‖q‖_β ≤ Q`.
    pub tail: f64,
    pub tail_q: Vec<i64>,
    pub visited: u64,
}

/// Scans all `q ≠ 0` (up to sign) with `|q_j| ≤ Q^{β_j}`, taking `p` as the
/// coordinate-wise nearest integer vector to `Aq`.
pub fn ba_search(a: &MatrixA, w: &WeightVector, height: f64, budget: u64) -> Result<BaSearch> {
    check_shape(a, w)?;
    if !(height >= 1.0) || !height.is_finite() {
        return Err(Error::InvalidInput(format!("Q must be at least 1, got {height}")));
    }
    let n = a.n();
    let bounds: Vec<i64> = w
        .beta()
        .iter()
        .map(|b| (height.powf(*b) + 1e-9).floor() as i64)
        .collect();
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
    let tail_lo = height.sqrt();
    let mut out = BaSearch {
        infimum: f64::INFINITY,
        infimum_q: vec![0; n],
        tail: f64::INFINITY,
        tail_q: vec![0; n],
        visited: 0,
    };
    let mut q: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        if q.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
            out.visited += 1;
            let qf: Vec<f64> = q.iter().map(|&c| c as f64).collect();
            let qn = quasi_norm(&qf, w.beta())?;
            if qn <= height * (1.0 + 1e-12) {
                let resid: Vec<f64> = a.apply(&q).iter().map(|x| x - x.round()).collect();
                let score = quasi_norm(&resid, w.alpha())? * qn;
                if score < out.infimum {
                    out.infimum = score;
                    out.infimum_q = q.clone();
                }
                if qn >= tail_lo * (1.0 - 1e-12) && score < out.tail {
                    out.tail = score;
                    out.tail_q = q.clone();
                }
            }
        }
        // odometer
        let mut k = 0;
        while k < n {
            if q[k] < bounds[k] {
                q[k] += 1;
                break;
            }
            q[k] = -bounds[k];
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(out)
}

/// Finite-horizon BA score: the tail-window minimum of `‖Aq − p‖_α ‖q‖_β`.
pub fn ba_score(a: &MatrixA, w: &WeightVector, height: f64) -> Result<f64> {
    Ok(ba_search(a, w, height, DEFAULT_BA_BUDGET)?.tail)
}

/// The literal minimum over every `0 < ‖q‖_β ≤ Q`.
pub fn ba_infimum(a: &MatrixA, w: &WeightVector, height: f64) -> Result<f64> {
    Ok(ba_search(a, w, height, DEFAULT_BA_BUDGET)?.infimum)
}

#[allow(dead_code)]
pub(crate) fn default_window_grid(window: (f64, f64)) -> Result<Vec<f64>> {
    uniform_grid(window.0, window.1, super::DEFAULT_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FailedSample, TrajectorySample};

    fn synthetic(values: &[(f64, f64)]) -> Vec<TrajectoryPoint> {
        values
            .iter()
            .map(|&(s, l)| {
                Ok(TrajectorySample {
                    s,
                    lambda1: l,
                    coeffs: vec![],
                    witness: vec![],
                    admissible_at: vec![],
                })
            })
            .collect()
    }

    #[test]
    fn constant_samples_are_bounded_away() {
        let pts = synthetic(&(0..20).map(|k| (k as f64, 0.7)).collect::<Vec<_>>());
        let r = divergence_diagnostic(&pts, DEFAULT_DIVERGENCE_THRESHOLD).unwrap();
        assert_eq!(r.behavior, Some(TailBehavior::BoundedAway));
        assert_eq!(r.kind, DiagnosticKind::Ba);
    }

    #[test]
    fn exponential_decay_is_divergent() {
        let pts = synthetic(&(0..20).map(|k| (k as f64 * 0.5, (-(k as f64) * 0.5).exp())).collect::<Vec<_>>());
        let r = divergence_diagnostic(&pts, DEFAULT_DIVERGENCE_THRESHOLD).unwrap();
        assert_eq!(r.behavior, Some(TailBehavior::Divergent));
        assert!((r.slope.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let mut pts = synthetic(&[(0.0, 1.0); 9]);
        assert!(divergence_diagnostic(&pts, 0.05).is_err());
        pts.push(Err(FailedSample {
            s: 1.0,
            message: String::new(),
            budget_exceeded: true,
        }));
        assert!(divergence_diagnostic(&pts, 0.05).is_err());
    }

    #[test]
    fn rational_scores_zero() {
        let a = MatrixA::scalar(0.5).unwrap();
        let w = WeightVector::uniform(1, 1);
        for q in [2.0, 3.0, 10.0, 1000.0] {
            assert_eq!(ba_score(&a, &w, q).unwrap(), 0.0);
            assert_eq!(ba_infimum(&a, &w, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn infimum_sees_small_denominators() {
        // for φ the q = 1 term gives |φ − 2| ≈ 0.381966
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = ba_search(&MatrixA::scalar(phi).unwrap(), &WeightVector::uniform(1, 1), 1000.0, 1 << 20).unwrap();
        assert!((s.infimum - (2.0 - phi)).abs() < 1e-12);
        assert_eq!(s.infimum_q, vec![1]);
        assert!(s.tail > 0.44);
    }

    #[test]
    fn ba_budget() {
        let a = MatrixA::new(1, 2, vec![0.1, 0.2]).unwrap();
        let w = WeightVector::uniform(1, 2);
        assert!(ba_search(&a, &w, 1e6, 1000).unwrap_err().is_budget());
    }

    #[test]
    fn report_display_is_horizon_relative() {
        let r = DiagnosticReport {
            kind: DiagnosticKind::Di,
            window: (1.0, 12.0),
            statistic: 0.85,
            verdict: Verdict::Consistent,
            behavior: None,
            slope: None,
            failed_samples: 0,
        };
        assert!(r.to_string().starts_with("consistent with DI at horizon S=12"));
    }
}
