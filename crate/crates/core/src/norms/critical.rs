use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{NormDescriptor, NormKind};
use crate::error::Result;
use crate::lattice::{Enumerator, Lattice};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusStatus {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRadius {
    pub value: f64,
    pub status: RadiusStatus,
}

impl CriticalRadius {
    pub fn is_exact(&self) -> bool {
        self.status == RadiusStatus::Exact
    }
}

/// Settings for the randomized hill-climb used when no exact value is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub seed: u64,
    /// Perturbation steps per start.
    pub iterations: usize,
    /// Random starting lattices in addition to the structured ones.
    pub restarts: usize,
    pub enumerator: Enumerator,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            seed: 0,
            iterations: 1500,
            restarts: 3,
            enumerator: Enumerator::default(),
        }
    }
}

/// Square root of the Hermite constant, `d = 2..=8`.
fn euclidean_exact(d: usize) -> Option<f64> {
    let gamma: f64 = match d {
        1 => 1.0,
        2 => 2.0 / 3f64.sqrt(),
        3 => 2f64.powf(1.0 / 3.0),
        4 => 2f64.sqrt(),
        5 => 8f64.powf(1.0 / 5.0),
        6 => (64.0f64 / 3.0).powf(1.0 / 6.0),
        7 => 64f64.powf(1.0 / 7.0),
        8 => 2.0,
        _ => return None,
    };
    Some(gamma.sqrt())
}

/// The critical radius `r_ν`: exact when registered, otherwise a lower
/// bound from the default estimate settings.
pub fn critical_radius(nu: &NormDescriptor) -> Result<CriticalRadius> {
    critical_radius_with(nu, &EstimateConfig::default())
}

pub fn critical_radius_with(nu: &NormDescriptor, cfg: &EstimateConfig) -> Result<CriticalRadius> {
    if let Some(value) = exact_value(nu) {
        return Ok(CriticalRadius {
            value,
            status: RadiusStatus::Exact,
        });
    }
    let value = estimate(nu, cfg)?;
    Ok(CriticalRadius {
        value,
        status: RadiusStatus::LowerBound,
    })
}

/// The registered exact value, if there is one.
pub fn critical_radius_exact(nu: &NormDescriptor) -> Option<CriticalRadius> {
    exact_value(nu).map(|value| CriticalRadius {
        value,
        status: RadiusStatus::Exact,
    })
}

fn exact_value(nu: &NormDescriptor) -> Option<f64> {
    match nu.kind() {
        NormKind::Sup => Some(1.0),
        _ if nu.is_euclidean() => euclidean_exact(nu.dim()),
        _ => None,
    }
}

/// Cartan matrix of a simply-laced Dynkin diagram given by its edges.
fn cartan(d: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut g = DMatrix::from_diagonal_element(d, d, 2.0);
    for &(i, j) in edges {
        g[(i, j)] = -1.0;
        g[(j, i)] = -1.0;
    }
    g
}

/// A unimodular lattice attaining the Euclidean critical radius in
/// dimension `d` (normalized root lattices `A2, A3, D4, D5, E6, E7, E8`).
pub fn euclidean_witness(d: usize) -> Option<Lattice> {
    let edges: &[(usize, usize)] = match d {
        2 => &[(0, 1)],
        3 => &[(0, 1), (1, 2)],
        4 => &[(0, 1), (1, 2), (1, 3)],
        5 => &[(0, 1), (1, 2), (2, 3), (2, 4)],
        6 => &[(0, 2), (2, 3), (3, 4), (4, 5), (1, 3)],
        7 => &[(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (1, 3)],
        8 => &[(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 3)],
        _ => return None,
    };
    if d == 2 {
        return Some(hexagonal_lattice(0.0));
    }
    let chol = nalgebra::Cholesky::new(cartan(d, edges))?;
    Lattice::normalized(chol.l().transpose()).ok()
}

/// The determinant-one hexagonal lattice rotated by `theta`.
pub fn hexagonal_lattice(theta: f64) -> Lattice {
    let a = (4.0f64 / 3.0).powf(0.25);
    let (s, c) = theta.sin_cos();
    let v1 = [a * c, a * s];
    let (x, y) = (a / 2.0, a * 3f64.sqrt() / 2.0);
    let v2 = [c * x - s * y, s * x + c * y];
    let b = DMatrix::from_column_slice(2, 2, &[v1[0], v1[1], v2[0], v2[1]]);
    Lattice::with_det_tolerance(b, 1e-12).expect("hexagonal basis is unimodular")
}

/// A random unimodular lattice: uniform entries in `[-1, 1]`, rescaled to
/// determinant one. Nearly singular draws are rejected.
pub fn random_unimodular(d: usize, rng: &mut Rng) -> Lattice {
    loop {
        let b = DMatrix::<f64>::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0));
        if b.determinant().abs() < 0.05 {
            continue;
        }
        if let Ok(l) = Lattice::normalized(b) {
            return l;
        }
    }
}

fn block_sum(top: &Lattice, bottom_scale: f64) -> DMatrix<f64> {
    let k = top.dim();
    let mut b = DMatrix::zeros(k + 1, k + 1);
    b.view_mut((0, 0), (k, k)).copy_from(top.basis());
    b[(k, k)] = bottom_scale;
    b
}

fn starting_points(nu: &NormDescriptor) -> Vec<Lattice> {
    let d = nu.dim();
    let mut out = vec![Lattice::identity(d)];
    if let Some(w) = euclidean_witness(d) {
        out.push(w);
    }
    if let NormKind::Cylindrical(eta) = nu.kind() {
        // stack of η-critical layers
        let layer = exact_value(eta).and_then(|_| match eta.kind() {
            NormKind::Sup => Some(Lattice::identity(eta.dim())),
            _ if eta.is_euclidean() => euclidean_witness(eta.dim()),
            _ => None,
        });
        if let Some(layer) = layer {
            if let Ok(l) = Lattice::normalized(block_sum(&layer, 1.0)) {
                out.push(l);
            }
        }
    }
    out
}

fn estimate(nu: &NormDescriptor, cfg: &EstimateConfig) -> Result<f64> {
    let d = nu.dim();
    let mut starts = starting_points(nu);
    let mut seed_rng = substream(cfg.seed, u64::MAX);
    for _ in 0..cfg.restarts {
        starts.push(random_unimodular(d, &mut seed_rng));
    }
    let mut best = 0.0f64;
    for (idx, start) in starts.into_iter().enumerate() {
        let mut rng = substream(cfg.seed, idx as u64);
        best = best.max(hill_climb(nu, start, cfg, &mut rng)?);
    }
    Ok(best)
}

fn hill_climb(nu: &NormDescriptor, start: Lattice, cfg: &EstimateConfig, rng: &mut Rng) -> Result<f64> {
    let d = nu.dim();
    let en = &cfg.enumerator;
    let mut current = start;
    let mut value = en.first_minimum(&current, nu)?.value;
    let mut sigma = 0.05;
    for _ in 0..cfg.iterations {
        let g = DMatrix::from_fn(d, d, |i, j| {
            f64::from(i == j) + sigma * rng.gen_range(-1.0..=1.0)
        });
        let Ok(candidate) = Lattice::normalized(&g * current.basis()) else {
            continue;
        };
        let v = match en.first_minimum(&candidate, nu) {
            Ok(fm) => fm.value,
            Err(e) if e.is_budget() => continue,
            Err(e) => return Err(e),
        };
        if v >= value {
            current = candidate;
            value = v;
            sigma = (sigma * 1.3).min(0.3);
        } else {
            sigma = (sigma * 0.93).max(1e-7);
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_values() {
        let r = critical_radius(&NormDescriptor::sup(5)).unwrap();
        assert_eq!((r.value, r.status), (1.0, RadiusStatus::Exact));
        let r = critical_radius(&NormDescriptor::euclidean(2)).unwrap();
        assert!(r.is_exact());
        assert!((r.value - 1.074_569_931_823_541).abs() < 1e-12);
        let r = critical_radius(&NormDescriptor::euclidean(3)).unwrap();
        assert!((r.value - 2f64.powf(1.0 / 6.0)).abs() < 1e-15);
        let r = critical_radius(&NormDescriptor::lp(2.0, 2).unwrap()).unwrap();
        assert!(r.is_exact());
    }

    #[test]
    fn witnesses_attain_registry() {
        for d in 2..=8 {
            let w = euclidean_witness(d).unwrap();
            let nu = NormDescriptor::euclidean(d);
            let fm = Enumerator::default().first_minimum(&w, &nu).unwrap();
            let exact = critical_radius(&nu).unwrap().value;
            assert!((fm.value - exact).abs() < 1e-9, "d={d}: {} vs {exact}", fm.value);
        }
    }

    #[test]
    fn hexagonal_rotation_keeps_minimum() {
        let nu = NormDescriptor::euclidean(2);
        for theta in [0.0, 0.3, 1.0, 2.5] {
            let fm = Enumerator::default()
                .first_minimum(&hexagonal_lattice(theta), &nu)
                .unwrap();
            assert!((fm.value - (4.0f64 / 3.0).powf(0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_mode_is_a_lower_bound_and_deterministic() {
        let nu = NormDescriptor::lp(3.0, 2).unwrap();
        let cfg = EstimateConfig {
            iterations: 200,
            restarts: 1,
            ..Default::default()
        };
        let a = critical_radius_with(&nu, &cfg).unwrap();
        let b = critical_radius_with(&nu, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.status, RadiusStatus::LowerBound);
        // at least as good as Z^2 (λ₁ = 1) and the hexagonal start
        assert!(a.value >= 1.0);
    }
}
