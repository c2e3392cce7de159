//! Seeded Monte Carlo drivers.
//!
//! Each run is a pure function of its [`ExperimentConfig`]: samples draw from
//! per-index substreams, are processed in parallel, and are aggregated in
//! index order, so reports are byte-identical across runs and thread counts.

mod report;

pub use report::{read_report, write_report, ReportFormat};

use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    di_diagnostic, divergence_diagnostic, orbit_entry, trajectory, uniform_grid, DiOptions,
    OrbitEntry, TailBehavior, TrajectoryOptions, Verdict, DEFAULT_DIVERGENCE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::lattice::{lattice_from_matrix, Enumerator, MatrixA};
use crate::norms::{critical_radius, NormDescriptor};
use crate::rng::substream;
use crate::weights::WeightVector;
use crate::EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Equidistribution,
    DiMeasure,
    BaInDi,
    SingDemo,
}

fn default_one() -> usize {
    1
}

fn default_norm() -> String {
    "sup".into()
}

fn default_step() -> f64 {
    crate::dynamics::DEFAULT_STEP
}

fn default_s_start() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_one")]
    pub m: usize,
    #[serde(default = "default_one")]
    pub n: usize,
    /// Uniform weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightVector>,
    /// Norm string as accepted by [`NormDescriptor::parse`].
    #[serde(default = "default_norm")]
    pub norm: String,
    /// Number of random matrices (Monte Carlo kinds).
    #[serde(default)]
    pub samples: usize,
    pub seed: u64,
    /// Flow times for `equidistribution`, horizons `S` for `di_measure`.
    #[serde(default)]
    pub s_values: Vec<f64>,
    /// Probe radius for `equidistribution` and `di_measure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Probe radii for `sing_demo`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Left end of the orbit window in `di_measure`.
    #[serde(default = "default_s_start")]
    pub s_start: f64,
    /// Horizon for `ba_in_di` (default 12) and `sing_demo` (default 8).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Row-major entries of the matrices for `ba_in_di` and `sing_demo`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_values: Vec<Vec<f64>>,
    /// Upper limit on the avoiding fraction at the largest horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fraction: Option<f64>,
    /// `sing_demo`: required bound on `λ₁` at the horizon (default 1e-3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            m: 1,
            n: 1,
            weights: None,
            norm: default_norm(),
            samples: 0,
            seed,
            s_values: Vec::new(),
            r: None,
            radii: Vec::new(),
            step: default_step(),
            s_start: default_s_start(),
            horizon: None,
            a_values: Vec::new(),
            max_fraction: None,
            threshold: None,
            budget: None,
            output: None,
            record_runtime: false,
        }
    }

    pub fn weights(&self) -> Result<WeightVector> {
        match &self.weights {
            Some(w) if w.m() != self.m || w.n() != self.n => Err(Error::InvalidInput(format!(
                "weights are for {}x{} but m, n = {}, {}",
                w.m(),
                w.n(),
                self.m,
                self.n
            ))),
            Some(w) => Ok(w.clone()),
            None => Ok(WeightVector::uniform(self.m, self.n)),
        }
    }

    pub fn norm_descriptor(&self) -> Result<NormDescriptor> {
        NormDescriptor::parse(&self.norm, self.m + self.n)
    }

    pub fn enumerator(&self) -> Enumerator {
        self.budget.map_or_else(Enumerator::default, Enumerator::with_budget)
    }

    fn matrices(&self) -> Result<Vec<MatrixA>> {
        self.a_values
            .iter()
            .map(|e| MatrixA::new(self.m, self.n, e.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidInput("m and n must be at least 1".into()));
        }
        self.weights()?;
        let nu = self.norm_descriptor()?;
        if !(self.step > 0.0) {
            return Err(Error::InvalidInput("step must be positive".into()));
        }
        match self.kind {
            ExperimentKind::Equidistribution | ExperimentKind::DiMeasure => {
                if self.samples < 100 {
                    return Err(Error::InvalidInput(format!(
                        "need at least 100 samples, got {}",
                        self.samples
                    )));
                }
                if self.s_values.is_empty() {
                    return Err(Error::InvalidInput("s_values is empty".into()));
                }
                let r = self
                    .r
                    .ok_or_else(|| Error::InvalidInput("probe radius r is required".into()))?;
                let r_nu = critical_radius(&nu)?.value;
                if !(r > 0.0 && r < r_nu) {
                    return Err(Error::InvalidInput(format!("r must lie in (0, r_ν = {r_nu}), got {r}")));
                }
            }
            ExperimentKind::BaInDi | ExperimentKind::SingDemo => {
                self.matrices()?;
            }
        }
        if self.kind == ExperimentKind::DiMeasure && self.s_values.iter().any(|&s| s < self.s_start) {
            return Err(Error::InvalidInput("every horizon must be at least s_start".into()));
        }
        Ok(())
    }
}

/// Binomial statistics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub param: f64,
    /// Samples that completed.
    pub n: u64,
    pub hits: u64,
    pub fraction: f64,
    /// `√(p̂(1 − p̂)/n)`.
    pub stderr: f64,
    pub failures: u64,
    /// A per-cell statistic where one applies (e.g. a max or a time).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Cell {
    pub fn new(label: &str, param: f64, n: u64, hits: u64, failures: u64) -> Self {
        let fraction = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let stderr = if n == 0 {
            0.0
        } else {
            (fraction * (1.0 - fraction) / n as f64).sqrt()
        };
        Cell {
            label: label.into(),
            param,
            n,
            hits,
            fraction,
            stderr,
            failures,
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub cells: Vec<Cell>,
    pub criteria: Vec<Criterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// A uniform random point of `[0, 1]^{mn}` from the stream of sample `index`.
pub fn random_matrix(m: usize, n: usize, seed: u64, index: u64) -> MatrixA {
    let mut rng = substream(seed, index);
    let entries = (0..m * n).map(|_| rng.gen::<f64>()).collect();
    MatrixA::new(m, n, entries).expect("shape is valid")
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (cells, criteria) = match cfg.kind {
        ExperimentKind::Equidistribution => equidistribution(cfg)?,
        ExperimentKind::DiMeasure => di_measure(cfg)?,
        ExperimentKind::BaInDi => ba_in_di(cfg)?,
        ExperimentKind::SingDemo => sing_demo(cfg)?,
    };
    Ok(ExperimentReport {
        kind: cfg.kind,
        seed: cfg.seed,
        cells,
        criteria,
        runtime_seconds: cfg.record_runtime.then(|| start.elapsed().as_secs_f64()),
        config: cfg.clone(),
    })
}

type Outcome = (Vec<Cell>, Vec<Criterion>);

/// Fraction of `a_s Λ_A ∈ K_ν(r)` at each `s`, compared pairwise.
fn equidistribution(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = cfg.weights()?;
    let nu = cfg.norm_descriptor()?;
    let r = cfg.r.expect("validated");
    let en = cfg.enumerator();
    let per_sample: Vec<Vec<Option<bool>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let base = lattice_from_matrix(&random_matrix(cfg.m, cfg.n, cfg.seed, i));
            cfg.s_values
                .iter()
                .map(|&s| {
                    crate::dynamics::flow_lattice(&base, &w, s)
                        .and_then(|l| en.is_admissible(&l, &nu, r))
                        .ok()
                })
                .collect()
        })
        .collect();
    let cells: Vec<Cell> = cfg
        .s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let done = per_sample.iter().filter_map(|v| v[k]);
            let (n, hits) = done.fold((0, 0), |(n, h), hit| (n + 1, h + hit as u64));
            Cell::new("s", s, n, hits, cfg.samples as u64 - n)
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 0..cells.len() {
        for j in (i + 1)..cells.len() {
            let se = (cells[i].stderr.powi(2) + cells[j].stderr.powi(2)).sqrt();
            let gap = (cells[i].fraction - cells[j].fraction).abs();
            let z = if se > 0.0 {
                gap / se
            } else if gap > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(z);
        }
    }
    let criteria = vec![Criterion {
        name: "pairwise_within_3_sigma".into(),
        passed: worst <= 3.0,
        detail: format!("largest pairwise gap is {worst:.3} standard errors"),
    }];
    Ok((cells, criteria))
}

/// Fraction of `A` whose orbit avoids `K_ν(r)` on `[s_start, S]`, for each `S`.
fn di_measure(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = cfg.weights()?;
    let nu = cfg.norm_descriptor()?;
    let r = cfg.r.expect("validated");
    let en = cfg.enumerator();
    let mut horizons = cfg.s_values.clone();
    horizons.sort_by(f64::total_cmp);
    let s_max = *horizons.last().expect("validated");
    // first entry time, +∞ when the whole window avoids, None when undetermined
    let entries: Vec<Option<f64>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let base = lattice_from_matrix(&random_matrix(cfg.m, cfg.n, cfg.seed, i));
            match orbit_entry(&base, &w, &nu, r, cfg.s_start, s_max, cfg.step, &en) {
                Ok(OrbitEntry::Enters { s, .. }) => Some(s),
                Ok(OrbitEntry::Avoids) => Some(f64::INFINITY),
                Ok(OrbitEntry::Undetermined) | Err(_) => None,
            }
        })
        .collect();
    let failures = entries.iter().filter(|e| e.is_none()).count() as u64;
    let n = cfg.samples as u64 - failures;
    let cells: Vec<Cell> = horizons
        .iter()
        .map(|&big_s| {
            let hits = entries.iter().flatten().filter(|&&s| s > big_s).count() as u64;
            Cell::new("S", big_s, n, hits, failures)
        })
        .collect();
    let monotone = cells.windows(2).all(|p| p[1].fraction <= p[0].fraction);
    let mut criteria = vec![Criterion {
        name: "avoiding_fraction_nonincreasing".into(),
        passed: monotone,
        detail: cells
            .iter()
            .map(|c| format!("S={}: {}", c.param, c.fraction))
            .collect::<Vec<_>>()
            .join(", "),
    }];
    if let Some(limit) = cfg.max_fraction {
        let last = cells.last().expect("validated").fraction;
        criteria.push(Criterion {
            name: "final_fraction_below_limit".into(),
            passed: last < limit,
            detail: format!("{last} at S={s_max}, limit {limit}"),
        });
    }
    Ok((cells, criteria))
}

/// The golden ratio, `√2` and `1 + √3`.
pub fn quadratic_irrationals() -> Vec<f64> {
    vec![(1.0 + 5f64.sqrt()) / 2.0, 2f64.sqrt(), 1.0 + 3f64.sqrt()]
}

/// Known badly approximable matrices should look Dirichlet-improvable.
fn ba_in_di(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = cfg.weights()?;
    let nu = cfg.norm_descriptor()?;
    let horizon = cfg.horizon.unwrap_or(12.0);
    let mats = if cfg.a_values.is_empty() {
        quadratic_irrationals()
            .into_iter()
            .map(|x| MatrixA::new(cfg.m, cfg.n, vec![x; cfg.m * cfg.n]))
            .collect::<Result<Vec<_>>>()?
    } else {
        cfg.matrices()?
    };
    let opts = DiOptions {
        enumerator: cfg.enumerator(),
        ..DiOptions::default()
    };
    let probes = ((horizon - cfg.s_start) / cfg.step).round() as usize + 1;
    let mut cells = Vec::new();
    let mut criteria = Vec::new();
    for a in &mats {
        let rep = di_diagnostic(a, &w, &nu, (cfg.s_start, horizon), probes.max(2), &opts)?;
        let ok = rep.verdict == Verdict::Consistent;
        let mut cell = Cell::new("A", a.get(0, 0), 1, ok as u64, rep.failed_samples as u64);
        cell.value = Some(rep.statistic);
        cells.push(cell);
        criteria.push(Criterion {
            name: format!("di_consistent_A={}", a.get(0, 0)),
            passed: ok,
            detail: rep.to_string(),
        });
    }
    Ok((cells, criteria))
}

/// Rational matrices: the orbit leaves every `K_ν(r)` and does not come back.
fn sing_demo(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = cfg.weights()?;
    let nu = cfg.norm_descriptor()?;
    let horizon = cfg.horizon.unwrap_or(8.0);
    let threshold = cfg.threshold.unwrap_or(1e-3);
    let r_nu = critical_radius(&nu)?.value;
    let radii = if cfg.radii.is_empty() {
        vec![0.5 * r_nu, 0.9 * r_nu]
    } else {
        cfg.radii.clone()
    };
    let mats = if cfg.a_values.is_empty() {
        vec![MatrixA::new(cfg.m, cfg.n, vec![0.5; cfg.m * cfg.n])?]
    } else {
        cfg.matrices()?
    };
    let grid = uniform_grid(0.0, horizon, cfg.step)?;
    let topts = TrajectoryOptions {
        probe_radii: radii.clone(),
        enumerator: cfg.enumerator(),
    };
    let mut cells = Vec::new();
    let mut criteria = Vec::new();
    for (k, a) in mats.iter().enumerate() {
        let pts = trajectory(a, &w, &nu, &grid, &topts)?;
        let failed = pts.iter().filter(|p| p.is_err()).count() as u64;
        let ok: Vec<_> = pts.iter().filter_map(|p| p.as_ref().ok()).collect();
        for &r in &radii {
            // last grid time still inside K(r); the orbit has left for good after it
            let last_inside = ok.iter().rposition(|p| p.lambda1 >= r - EPS);
            let exit = match last_inside {
                Some(i) => ok.get(i + 1).map(|p| p.s),
                None => ok.first().map(|p| p.s),
            };
            let mut cell = Cell::new(&format!("r@A{k}"), r, 1, exit.is_some() as u64, failed);
            cell.value = exit;
            cells.push(cell);
            criteria.push(Criterion {
                name: format!("leaves_K({r})_A{k}"),
                passed: exit.is_some(),
                detail: match exit {
                    Some(s) => format!("below {r} from s={s} to the horizon"),
                    None => format!("still in K({r}) at s={horizon}"),
                },
            });
        }
        let final_value = ok.last().filter(|p| p.s >= horizon - 1e-9).map(|p| p.lambda1);
        criteria.push(Criterion {
            name: format!("lambda1_below_threshold_A{k}"),
            passed: final_value.is_some_and(|v| v < threshold),
            detail: format!("λ₁ = {:?} at s={horizon}, threshold {threshold}", final_value),
        });
        if let Ok(rep) = divergence_diagnostic(&pts, DEFAULT_DIVERGENCE_THRESHOLD) {
            criteria.push(Criterion {
                name: format!("tail_divergent_A{k}"),
                passed: rep.behavior == Some(TailBehavior::Divergent),
                detail: format!("slope {:?}", rep.slope),
            });
        }
    }
    Ok((cells, criteria))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_equi() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Equidistribution, 5);
        cfg.samples = 200;
        cfg.s_values = vec![2.0, 4.0];
        cfg.r = Some(0.9);
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_equi();
        assert!(cfg.validate().is_ok());
        cfg.samples = 99;
        assert!(cfg.validate().is_err());
        let mut cfg = small_equi();
        cfg.r = Some(1.0);
        assert!(cfg.validate().is_err());
        cfg.r = None;
        assert!(cfg.validate().is_err());
        let json = r#"{"kind":"equidistribution","seed":1,"samples":100,"s_values":[1],"r":0.5,"bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }

    #[test]
    fn stderr_formula() {
        let c = Cell::new("s", 1.0, 400, 100, 0);
        assert_eq!(c.fraction, 0.25);
        assert!((c.stderr - (0.25f64 * 0.75 / 400.0).sqrt()).abs() < 1e-15);
        let e = Cell::new("s", 1.0, 0, 0, 3);
        assert_eq!((e.fraction, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn equidistribution_is_deterministic() {
        let a = run_experiment(&small_equi()).unwrap();
        let b = run_experiment(&small_equi()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 2);
        assert!(a.cells.iter().all(|c| c.n == 200));
        assert!(a.runtime_seconds.is_none());
    }

    #[test]
    fn sing_demo_default_is_the_half() {
        let cfg = ExperimentConfig::new(ExperimentKind::SingDemo, 0);
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.criteria);
    }

    #[test]
    fn ba_in_di_default_instances() {
        let cfg = ExperimentConfig::new(ExperimentKind::BaInDi, 0);
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.cells.len(), 3);
        assert!(rep.passed(), "{:?}", rep.criteria);
    }
}
