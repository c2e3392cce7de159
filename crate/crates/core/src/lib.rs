//! Computational tools for weighted uniform Diophantine approximation under
//! general norms.
//!
//! The crate builds the unimodular lattices `Λ_A = u_A Z^d` attached to an
//! `m × n` matrix, moves them along the weighted diagonal flow `a_s`, and
//! measures first minima under arbitrary norms. On top of that sit the
//! arithmetic and geometric Dirichlet checkers, samplers for the explicitly
//! known critical loci, and Monte Carlo drivers.

pub mod dirichlet;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod loci;
pub mod norms;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
pub use lattice::{Enumerator, Lattice, MatrixA};
pub use norms::{NormDescriptor, NormKind};
pub use weights::WeightVector;

/// Global comparison tolerance.
pub const EPS: f64 = 1e-9;
