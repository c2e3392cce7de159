//! Unimodular lattices, LLL reduction and Fincke–Pohst enumeration.

mod enumerate;
mod lll;

pub use enumerate::{
    enumerate_in_ball, first_minimum, is_admissible, EnumeratedVector, EnumerationResult,
    Enumerator, FirstMinimum, DEFAULT_NODE_BUDGET, colex, is_canonical, witness_order,
};
pub use lll::{lll_reduce, lll_reduce_with_transform, Reduction};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `|det − 1|`.
pub const DET_TOLERANCE: f64 = 1e-8;

/// A lattice in `R^d` given by a basis whose columns are the generators.
///
/// Lattices built through [`Lattice::new`] are unimodular; [`Lattice::with_det_tolerance`]
/// relaxes the check for the few places that need scaled copies.
#[derive(Debug, Clone)]
pub struct Lattice {
    basis: DMatrix<f64>,
    det_tolerance: f64,
}

/// Equal bases; the tolerance used at construction is not part of the lattice.
impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis
    }
}

impl Lattice {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        Self::with_det_tolerance(basis, DET_TOLERANCE)
    }

    pub fn with_det_tolerance(basis: DMatrix<f64>, det_tolerance: f64) -> Result<Self> {
        let d = basis.nrows();
        if d < 1 || basis.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "basis must be square, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("basis has non-finite entries".into()));
        }
        let det = basis.determinant();
        if det.abs() <= f64::MIN_POSITIVE || !det.is_finite() {
            return Err(Error::NumericalRank(format!("determinant {det}")));
        }
        if (det - 1.0).abs() > det_tolerance {
            return Err(Error::InvalidInput(format!(
                "basis is not unimodular: det = {det}"
            )));
        }
        Ok(Lattice {
            basis,
            det_tolerance,
        })
    }

    /// Rescales an arbitrary full-rank basis to determinant one, negating the
    /// first column if the orientation is reversed.
    pub fn normalized(mut basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d || d == 0 {
            return Err(Error::InvalidInput("basis must be square".into()));
        }
        let mut det = basis.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::NumericalRank(format!("determinant {det}")));
        }
        if det < 0.0 {
            basis.column_mut(0).neg_mut();
            det = -det;
        }
        basis /= det.powf(1.0 / d as f64);
        Self::new(basis)
    }

    pub fn identity(d: usize) -> Self {
        Lattice {
            basis: DMatrix::identity(d, d),
            det_tolerance: DET_TOLERANCE,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn det_tolerance(&self) -> f64 {
        self.det_tolerance
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.basis.column(j).iter().copied().collect()
    }

    /// The point `basis · coeffs`.
    pub fn point(&self, coeffs: &[i64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.basis[(i, j)] * c;
            }
        }
        out
    }

    /// `g · Λ` for a matrix `g` of determinant one.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Lattice> {
        if g.nrows() != self.dim() || g.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: g.nrows(),
            });
        }
        let basis = g * &self.basis;
        // relative error of the product grows with the condition of g
        let scale = g.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let tol = self.det_tolerance.max(1e-12 * scale * scale);
        Lattice::with_det_tolerance(basis, tol)
    }

    /// Scaled copy `c · Λ`; not unimodular unless `c = ±1`.
    pub fn scaled(&self, c: f64) -> Result<Lattice> {
        Lattice::with_det_tolerance(&self.basis * c, f64::INFINITY)
    }

    /// Integer coordinates of `x` in this basis, if `x` is a lattice point
    /// within `tol`.
    pub fn coordinates_of(&self, x: &[f64], tol: f64) -> Option<Vec<i64>> {
        let inv = self.basis.clone().try_inverse()?;
        let v = nalgebra::DVector::from_column_slice(x);
        let y = inv * v;
        let mut out = Vec::with_capacity(y.len());
        for &yi in y.iter() {
            let r = yi.round();
            if (yi - r).abs() > tol {
                return None;
            }
            out.push(r as i64);
        }
        Some(out)
    }

    /// Whether the standard basis vector `e_i` (0-based) lies in the lattice.
    pub fn contains_basis_vector(&self, i: usize, tol: f64) -> bool {
        let mut e = vec![0.0; self.dim()];
        e[i] = 1.0;
        self.coordinates_of(&e, tol).is_some()
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeJson {
    d: usize,
    basis: Vec<Vec<f64>>,
}

impl Serialize for Lattice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let basis = (0..d).map(|j| self.column(j)).collect();
        LatticeJson { d, basis }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lattice {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = LatticeJson::deserialize(de)?;
        if raw.basis.len() != raw.d || raw.basis.iter().any(|c| c.len() != raw.d) {
            return Err(D::Error::custom("basis must be d columns of length d"));
        }
        let flat: Vec<f64> = raw.basis.into_iter().flatten().collect();
        let m = DMatrix::from_column_slice(raw.d, raw.d, &flat);
        Lattice::new(m).map_err(D::Error::custom)
    }
}

/// An `m × n` real matrix, viewed as `m` linear forms in `n` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixA {
    m: usize,
    n: usize,
    /// row-major
    entries: Vec<f64>,
}

impl MatrixA {
    pub fn new(m: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("m and n must be at least 1".into()));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                found: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(MatrixA { m, n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(m, n, rows.concat())
    }

    pub fn scalar(a: f64) -> Result<Self> {
        Self::new(1, 1, vec![a])
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        MatrixA {
            m,
            n,
            entries: vec![0.0; m * n],
        }
    }

    /// Parses inline row-major text: entries separated by `,`, rows by `;`.
    pub fn parse_inline(text: &str) -> Result<Self> {
        let rows = text
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|e| {
                            Error::InvalidInput(format!("bad matrix entry {t:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.m + self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `A·q`.
    pub fn apply(&self, q: &[i64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(q)
                    .map(|(a, &qj)| a * qj as f64)
                    .sum()
            })
            .collect()
    }

    /// The block-unipotent matrix `u_A = [I_m A; 0 I_n]`.
    pub fn unipotent(&self) -> DMatrix<f64> {
        let d = self.d();
        let mut u = DMatrix::identity(d, d);
        for i in 0..self.m {
            for j in 0..self.n {
                u[(i, self.m + j)] = self.get(i, j);
            }
        }
        u
    }
}

/// `Λ_A = u_A Z^d`.
pub fn lattice_from_matrix(a: &MatrixA) -> Lattice {
    // u_A is unipotent so its determinant is exactly one.
    Lattice {
        basis: a.unipotent(),
        det_tolerance: DET_TOLERANCE,
    }
}
