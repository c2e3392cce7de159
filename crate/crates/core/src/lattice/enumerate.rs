use std::cmp::Ordering;

use super::lll::{gram_schmidt, lll_reduce_with_transform};
use super::Lattice;
use crate::error::{Error, Result};
use crate::norms::NormDescriptor;
use crate::EPS;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Enumeration settings shared by every first-minimum computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumerator {
    pub node_budget: u64,
    pub lll_delta: f64,
}

impl Default for Enumerator {
    fn default() -> Self {
        Enumerator {
            node_budget: DEFAULT_NODE_BUDGET,
            lll_delta: 0.99,
        }
    }
}

impl Enumerator {
    pub fn with_budget(node_budget: u64) -> Self {
        Enumerator {
            node_budget,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedVector {
    /// Integer coordinates with respect to the lattice's own basis.
    pub coeffs: Vec<i64>,
    pub point: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    /// One representative of each `±v`, sorted by norm then colexicographically.
    pub vectors: Vec<EnumeratedVector>,
    pub radius: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstMinimum {
    pub value: f64,
    pub coeffs: Vec<i64>,
    pub witness: Vec<f64>,
}

/// Colexicographic order: last coordinate is most significant.
pub fn colex(a: &[i64], b: &[i64]) -> Ordering {
    a.iter().rev().cmp(b.iter().rev())
}

/// Witness order: smaller `ℓ¹` coefficient size first, then colexicographic.
pub fn witness_order(a: &[i64], b: &[i64]) -> Ordering {
    let l1 = |x: &[i64]| x.iter().map(|c| c.unsigned_abs()).sum::<u64>();
    l1(a).cmp(&l1(b)).then_with(|| colex(a, b))
}

pub fn is_canonical(x: &[i64]) -> bool {
    x.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

fn pad(r: f64) -> f64 {
    r * (1.0 + EPS) + EPS
}

struct Exceeded;

/// Fincke–Pohst depth-first search over `‖Σ y_k b_k‖² < radius_sq` on a
/// reduced basis. The visitor may shrink the radius by returning a new
/// squared radius.
struct Search<'a, F> {
    mu: &'a [Vec<f64>],
    norms: &'a [f64],
    y: Vec<i64>,
    radius_sq: f64,
    nodes: u64,
    budget: u64,
    visit: F,
}

impl<F: FnMut(&[i64]) -> Option<f64>> Search<'_, F> {
    fn level(&mut self, k: usize, partial: f64) -> std::result::Result<(), Exceeded> {
        let d = self.y.len();
        let center: f64 = -((k + 1)..d)
            .map(|i| self.mu[i][k] * self.y[i] as f64)
            .sum::<f64>();
        let rem = self.radius_sq - partial;
        if rem < 0.0 {
            return Ok(());
        }
        let half = (rem / self.norms[k]).sqrt();
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for yk in lo..=hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Exceeded);
            }
            let off = yk as f64 - center;
            let dist = partial + self.norms[k] * off * off;
            if dist >= self.radius_sq {
                continue;
            }
            self.y[k] = yk;
            if k == 0 {
                if self.y.iter().any(|&c| c != 0) {
                    if let Some(r2) = (self.visit)(&self.y) {
                        self.radius_sq = r2;
                    }
                }
            } else {
                self.level(k - 1, dist)?;
            }
        }
        self.y[k] = 0;
        Ok(())
    }
}

/// Reduced basis plus the map back to the caller's coordinates.
struct Prepared {
    reduced: Lattice,
    transform: nalgebra::DMatrix<i64>,
    mu: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl Prepared {
    fn new(lattice: &Lattice, delta: f64) -> Result<Self> {
        let red = lll_reduce_with_transform(lattice, delta)?;
        let cols: Vec<Vec<f64>> = (0..lattice.dim()).map(|j| red.lattice.column(j)).collect();
        let gso = gram_schmidt(&cols)?;
        Ok(Prepared {
            reduced: red.lattice,
            transform: red.transform,
            mu: gso.mu,
            norms: gso.norms,
        })
    }

    fn original_coeffs(&self, y: &[i64]) -> Vec<i64> {
        let d = y.len();
        (0..d)
            .map(|i| (0..d).map(|j| self.transform[(i, j)] * y[j]).sum())
            .collect()
    }

    fn run<F: FnMut(&[i64]) -> Option<f64>>(
        &self,
        radius_sq: f64,
        budget: u64,
        visit: F,
    ) -> std::result::Result<u64, Exceeded> {
        let d = self.reduced.dim();
        let mut s = Search {
            mu: &self.mu,
            norms: &self.norms,
            y: vec![0; d],
            radius_sq,
            nodes: 0,
            budget,
            visit,
        };
        s.level(d - 1, 0.0)?;
        Ok(s.nodes)
    }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Enumerator {
    /// All nonzero lattice vectors of Euclidean length `< radius`, up to sign.
    pub fn enumerate_in_ball(&self, lattice: &Lattice, radius: f64) -> Result<EnumerationResult> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        let prep = Prepared::new(lattice, self.lll_delta)?;
        let mut vectors = Vec::new();
        let search_sq = pad(radius).powi(2);
        let nodes = prep
            .run(search_sq, self.node_budget, |y| {
                let x = prep.original_coeffs(y);
                if is_canonical(&x) {
                    let point = prep.reduced.point(y);
                    let norm = euclid(&point);
                    if norm < radius {
                        vectors.push(EnumeratedVector {
                            coeffs: x,
                            point,
                            norm,
                        });
                    }
                }
                None
            })
            .map_err(|_| Error::BudgetExceeded {
                budget: self.node_budget,
                best_upper_bound: None,
            })?;
        vectors.sort_by(|a, b| {
            a.norm
                .partial_cmp(&b.norm)
                .unwrap_or(Ordering::Equal)
                .then_with(|| colex(&a.coeffs, &b.coeffs))
        });
        Ok(EnumerationResult {
            vectors,
            radius,
            nodes,
        })
    }

    /// `min ν(v)` over nonzero `v ∈ Λ`, with a canonical witness.
    ///
    /// Ties (values within `EPS` relative) go to the coefficient vector with
    /// the smallest `ℓ¹` size, then the colexicographically smallest; signs are
    /// fixed so that the first nonzero entry is positive.
    pub fn first_minimum(&self, lattice: &Lattice, nu: &NormDescriptor) -> Result<FirstMinimum> {
        nu.check_dim(lattice.dim())?;
        let (c_lo, _) = nu.sandwich();
        let prep = Prepared::new(lattice, self.lll_delta)?;
        let d = lattice.dim();

        // upper bound from the reduced basis
        let mut best = f64::INFINITY;
        for j in 0..d {
            best = best.min(nu.value(&prep.reduced.column(j)));
        }
        let tie = |v: f64| v * (1.0 + EPS) + EPS * 1e-3;
        let mut candidates: Vec<(f64, Vec<i64>, Vec<f64>)> = Vec::new();
        let radius_sq = |b: f64| pad(b / c_lo).powi(2);

        let res = prep.run(radius_sq(best), self.node_budget, |y| {
            let x = prep.original_coeffs(y);
            if !is_canonical(&x) {
                return None;
            }
            let point = prep.reduced.point(y);
            let v = nu.value(&point);
            if v <= tie(best) {
                if v < best {
                    best = v;
                    candidates.retain(|(cv, _, _)| *cv <= tie(best));
                }
                candidates.push((v, x, point));
                return Some(radius_sq(best));
            }
            None
        });
        if res.is_err() {
            return Err(Error::BudgetExceeded {
                budget: self.node_budget,
                best_upper_bound: Some(best),
            });
        }
        candidates.retain(|(cv, _, _)| *cv <= tie(best));
        let (_, coeffs, witness) = candidates
            .into_iter()
            .min_by(|a, b| witness_order(&a.1, &b.1))
            .ok_or_else(|| Error::NumericalRank("enumeration found no vectors".into()))?;
        Ok(FirstMinimum {
            value: best,
            coeffs,
            witness,
        })
    }

    /// `Λ ∈ K_ν(r)`: no nonzero vector in the open ball `B_ν(r)`. Values within
    /// `EPS` of `r` count as on the boundary, hence admissible.
    pub fn is_admissible(&self, lattice: &Lattice, nu: &NormDescriptor, r: f64) -> Result<bool> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("probe radius must be positive, got {r}")));
        }
        Ok(self.first_minimum(lattice, nu)?.value >= r - EPS)
    }
}

pub fn enumerate_in_ball(lattice: &Lattice, radius: f64) -> Result<EnumerationResult> {
    Enumerator::default().enumerate_in_ball(lattice, radius)
}

pub fn first_minimum(lattice: &Lattice, nu: &NormDescriptor) -> Result<FirstMinimum> {
    Enumerator::default().first_minimum(lattice, nu)
}

pub fn is_admissible(lattice: &Lattice, nu: &NormDescriptor, r: f64) -> Result<bool> {
    Enumerator::default().is_admissible(lattice, nu, r)
}
