//! Samplers and membership tests for the critical loci that have an explicit
//! description, and the flow direction along which each one diverges.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::flow_lattice;
use crate::error::{Error, Result};
use crate::lattice::{Enumerator, Lattice};
use crate::norms::{critical_radius, hexagonal_lattice, NormDescriptor};
use crate::rng::{substream, Rng};
use crate::weights::WeightVector;
use crate::EPS;

/// Tolerance for the integer test `e_i ∈ L`.
const MEMBER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LocusDescriptor {
    /// `w·u·w·g` with `u` upper unipotent and `g ∈ SL_d(Z)`; `perm[i]` is
    /// the image of coordinate `i` under the permutation `w`.
    HajosSup { d: usize, perm: Vec<usize> },
    /// Cylinder-norm locus with an axis vector: third column `(0, 0, *)`.
    CylindricalZ1,
    /// Cylinder-norm locus with a horizontal vector: `(3, 1)` entry zero.
    CylindricalZ2,
    /// Rotations of the hexagonal lattice.
    HexagonalEuclid2,
}

impl LocusDescriptor {
    pub fn hajos(d: usize, perm: Vec<usize>) -> Result<Self> {
        let desc = LocusDescriptor::HajosSup { d, perm };
        desc.validate()?;
        Ok(desc)
    }

    pub fn hajos_identity(d: usize) -> Self {
        LocusDescriptor::HajosSup {
            d,
            perm: (0..d).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LocusDescriptor::HajosSup { d, .. } => *d,
            LocusDescriptor::CylindricalZ1 | LocusDescriptor::CylindricalZ2 => 3,
            LocusDescriptor::HexagonalEuclid2 => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LocusDescriptor::HajosSup { d, perm } = self {
            if *d < 1 {
                return Err(Error::InvalidInput("dimension must be at least 1".into()));
            }
            let mut seen = vec![false; *d];
            if perm.len() != *d {
                return Err(Error::DimensionMismatch {
                    expected: *d,
                    found: perm.len(),
                });
            }
            for &p in perm {
                if p >= *d || seen[p] {
                    return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
                }
                seen[p] = true;
            }
        }
        Ok(())
    }

    /// The norm whose critical locus this family describes; the cylinder
    /// uses a Euclidean disc.
    pub fn norm(&self) -> NormDescriptor {
        match self {
            LocusDescriptor::HajosSup { d, .. } => NormDescriptor::sup(*d),
            LocusDescriptor::CylindricalZ1 | LocusDescriptor::CylindricalZ2 => {
                NormDescriptor::cylindrical(NormDescriptor::euclidean(2))
            }
            LocusDescriptor::HexagonalEuclid2 => NormDescriptor::euclidean(2),
        }
    }

    /// `hajos:<d>:<perm>`, e.g. `hajos:3:2,0,1`, or `z1`, `z2`, `hex`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "z1" => return Ok(LocusDescriptor::CylindricalZ1),
            "z2" => return Ok(LocusDescriptor::CylindricalZ2),
            "hex" => return Ok(LocusDescriptor::HexagonalEuclid2),
            _ => {}
        }
        let bad = || Error::InvalidInput(format!("unknown locus {text:?}"));
        let rest = text.strip_prefix("hajos:").ok_or_else(bad)?;
        let (d, perm) = match rest.split_once(':') {
            Some((d, p)) => (d, Some(p)),
            None => (rest, None),
        };
        let d: usize = d.parse().map_err(|_| bad())?;
        let perm = match perm {
            Some(p) => p
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?,
            None => (0..d).collect(),
        };
        Self::hajos(d, perm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusSample {
    pub descriptor: LocusDescriptor,
    pub seed: u64,
    pub lattice: Lattice,
}

fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let d = perm.len();
    let mut w = DMatrix::zeros(d, d);
    for (i, &p) in perm.iter().enumerate() {
        w[(p, i)] = 1.0;
    }
    w
}

/// `w·u·w·g` for explicit `u` (upper unipotent) and `g ∈ SL_d(Z)`.
pub fn hajos_lattice(perm: &[usize], u: &DMatrix<f64>, g: &DMatrix<i64>) -> Result<Lattice> {
    let d = perm.len();
    if u.nrows() != d || u.ncols() != d || g.nrows() != d || g.ncols() != d {
        return Err(Error::InvalidInput("u and g must be d×d".into()));
    }
    for i in 0..d {
        for j in 0..=i {
            let expected = if i == j { 1.0 } else { 0.0 };
            if u[(i, j)] != expected {
                return Err(Error::InvalidInput("u must be upper unipotent".into()));
            }
        }
    }
    let w = permutation_matrix(perm);
    let gf = g.map(|x| x as f64);
    Lattice::new(&w * u * &w * gf)
}

/// A product of at most four elementary matrices `I ± E_ij`.
fn random_integer_word(d: usize, rng: &mut Rng) -> DMatrix<i64> {
    let mut g = DMatrix::<i64>::identity(d, d);
    if d < 2 {
        return g;
    }
    let len = rng.gen_range(0..=4);
    for _ in 0..len {
        let i = rng.gen_range(0..d);
        let mut j = rng.gen_range(0..d - 1);
        if j >= i {
            j += 1;
        }
        let sign = if rng.gen::<bool>() { 1 } else { -1 };
        // g ← g·(I + sign·E_ij): column j += sign·column i
        for r in 0..d {
            g[(r, j)] += sign * g[(r, i)];
        }
    }
    g
}

/// Critical cylinder lattices with a hexagonal planar part of minimum `r`
/// and an axis step `r`, where `r³·√3/2 = 1`.
fn cylinder_lattice(z1: bool, rng: &mut Rng) -> Result<Lattice> {
    let hex = hexagonal_lattice(rng.gen_range(0.0..std::f64::consts::TAU));
    let r = (2.0 / 3f64.sqrt()).powf(1.0 / 3.0);
    // hexagonal_lattice has minimum (4/3)^{1/4}; rescale the plane to minimum r
    let scale = r / (4.0f64 / 3.0).powf(0.25);
    let mut b = DMatrix::zeros(3, 3);
    for i in 0..2 {
        for j in 0..2 {
            b[(i, j)] = scale * hex.basis()[(i, j)];
        }
    }
    b[(2, 2)] = r;
    if z1 {
        // columns 1, 2 get random heights, column 3 is the axis vector
        b[(2, 0)] = rng.gen_range(-0.5..0.5) * r;
        b[(2, 1)] = rng.gen_range(-0.5..0.5) * r;
    } else {
        // column 3 gets a random horizontal offset, columns 1, 2 are planar
        b[(0, 2)] = rng.gen_range(-0.5..0.5) * r;
        b[(1, 2)] = rng.gen_range(-0.5..0.5) * r;
    }
    Lattice::normalized(b)
}

/// Draws one lattice from the family. Deterministic in `seed`.
pub fn sample_locus(desc: &LocusDescriptor, seed: u64) -> Result<LocusSample> {
    desc.validate()?;
    let mut rng = substream(seed, 0);
    let lattice = match desc {
        LocusDescriptor::HajosSup { d, perm } => {
            let d = *d;
            let mut u = DMatrix::identity(d, d);
            for i in 0..d {
                for j in (i + 1)..d {
                    u[(i, j)] = rng.gen_range(-0.5..=0.5);
                }
            }
            let g = random_integer_word(d, &mut rng);
            hajos_lattice(perm, &u, &g)?
        }
        LocusDescriptor::CylindricalZ1 => cylinder_lattice(true, &mut rng)?,
        LocusDescriptor::CylindricalZ2 => cylinder_lattice(false, &mut rng)?,
        LocusDescriptor::HexagonalEuclid2 => hexagonal_lattice(rng.gen_range(0.0..std::f64::consts::TAU)),
    };
    Ok(LocusSample {
        descriptor: desc.clone(),
        seed,
        lattice,
    })
}

/// `λ₁(L, ν) ≥ r_ν − EPS`. Needs an exact critical radius.
pub fn locus_membership(l: &Lattice, nu: &NormDescriptor, en: &Enumerator) -> Result<bool> {
    let r = critical_radius(nu)?;
    if !r.is_exact() {
        return Err(Error::Domain(format!(
            "no exact critical radius for {nu:?}; use locus_membership_at with a bound"
        )));
    }
    locus_membership_at(l, nu, r.value, en)
}

/// Admissibility at a supplied radius, e.g. an estimate-mode lower bound.
pub fn locus_membership_at(l: &Lattice, nu: &NormDescriptor, radius: f64, en: &Enumerator) -> Result<bool> {
    Ok(en.first_minimum(l, nu)?.value >= radius - EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// The sign of `s` along which the lattice degenerates.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Which way the flow pushes a locus lattice to the cusp.
///
/// A Hajós sample contains some `e_i`; it is contracted for `s > 0` when
/// `i > m` and for `s < 0` when `i ≤ m`. Indices are searched from `d`
/// down to `1`.
pub fn divergence_direction(l: &Lattice, w: &WeightVector, desc: &LocusDescriptor) -> Result<Direction> {
    if l.dim() != w.d() || l.dim() != desc.dim() {
        return Err(Error::DimensionMismatch {
            expected: desc.dim(),
            found: l.dim(),
        });
    }
    match desc {
        LocusDescriptor::HajosSup { d, .. } => {
            for i in (0..*d).rev() {
                if l.contains_basis_vector(i, MEMBER_TOL) {
                    return Ok(if i < w.m() {
                        Direction::Backward
                    } else {
                        Direction::Forward
                    });
                }
            }
            Err(Error::SamplerBug("Hajós sample contains no standard basis vector".into()))
        }
        LocusDescriptor::CylindricalZ1 => {
            if w.m() != 2 {
                return Err(Error::InvalidInput("cylinder loci need m = 2, n = 1".into()));
            }
            Ok(Direction::Forward)
        }
        LocusDescriptor::CylindricalZ2 => {
            if w.m() != 2 {
                return Err(Error::InvalidInput("cylinder loci need m = 2, n = 1".into()));
            }
            Ok(Direction::Backward)
        }
        LocusDescriptor::HexagonalEuclid2 => Err(Error::Domain(
            "the hexagonal locus has no distinguished divergence direction".into(),
        )),
    }
}

/// `λ₁(a_{±horizon} L, ν)` on the side given by `dir`.
pub fn far_end_minimum(
    l: &Lattice,
    w: &WeightVector,
    nu: &NormDescriptor,
    dir: Direction,
    horizon: f64,
    en: &Enumerator,
) -> Result<f64> {
    Ok(en.first_minimum(&flow_lattice(l, w, dir.sign() * horizon)?, nu)?.value)
}
