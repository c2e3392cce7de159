//! Norms on `R^d`, weighted quasi-norms and critical radii.

mod critical;

pub use critical::{
    critical_radius, critical_radius_exact, critical_radius_with, euclidean_witness, hexagonal_lattice,
    random_unimodular, CriticalRadius, EstimateConfig, RadiusStatus,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    Sup,
    Euclidean,
    Lp(f64),
    /// `(x', z) ↦ max{η(x'), |z|}` with `η` a norm on the first `d − 1` coordinates.
    Cylindrical(Box<NormDescriptor>),
}

/// A norm on `R^d` together with its Euclidean sandwich constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NormDescriptor {
    kind: NormKind,
    dim: usize,
    c_lo: f64,
    c_hi: f64,
}

impl NormDescriptor {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("norm dimension must be positive".into()));
        }
        let dd = dim as f64;
        let (c_lo, c_hi) = match &kind {
            NormKind::Sup => (1.0 / dd.sqrt(), 1.0),
            NormKind::Euclidean => (1.0, 1.0),
            NormKind::Lp(p) => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(Error::InvalidInput(format!("Lp norm needs 1 < p < ∞, got {p}")));
                }
                let e = 1.0 / p - 0.5;
                if *p >= 2.0 {
                    (dd.powf(e), 1.0)
                } else {
                    (1.0, dd.powf(e))
                }
            }
            NormKind::Cylindrical(eta) => {
                if dim < 2 || eta.dim != dim - 1 {
                    return Err(Error::DimensionMismatch {
                        expected: dim.saturating_sub(1),
                        found: eta.dim,
                    });
                }
                let (a, b) = eta.sandwich();
                (a.min(1.0) / 2f64.sqrt(), b.max(1.0))
            }
        };
        Ok(NormDescriptor {
            kind,
            dim,
            c_lo,
            c_hi,
        })
    }

    pub fn sup(dim: usize) -> Self {
        Self::new(NormKind::Sup, dim).expect("valid")
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(NormKind::Euclidean, dim).expect("valid")
    }

    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::Lp(p), dim)
    }

    /// Cylindrical norm on `R^{k+1}` built from a planar (or `k`-dim) `η`.
    pub fn cylindrical(eta: NormDescriptor) -> Self {
        let dim = eta.dim + 1;
        Self::new(NormKind::Cylindrical(Box::new(eta)), dim).expect("valid")
    }

    /// Parses `sup`, `euclid`, `lp:<p>` or `cyl:<inner>` for dimension `d`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let t = text.trim();
        match t {
            "sup" | "inf" | "max" => return Self::new(NormKind::Sup, dim),
            "euclid" | "euclidean" | "l2" => return Self::new(NormKind::Euclidean, dim),
            _ => {}
        }
        if let Some(p) = t.strip_prefix("lp:") {
            let p: f64 = p
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad p {p:?}: {e}")))?;
            return Self::lp(p, dim);
        }
        if let Some(inner) = t.strip_prefix("cyl:") {
            if dim < 2 {
                return Err(Error::InvalidInput("cylindrical norm needs d ≥ 2".into()));
            }
            let eta = Self::parse(inner, dim - 1)?;
            return Self::new(NormKind::Cylindrical(Box::new(eta)), dim);
        }
        Err(Error::InvalidInput(format!("unknown norm {text:?}")))
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(c_lo, c_hi)` with `c_lo‖x‖₂ ≤ ν(x) ≤ c_hi‖x‖₂`.
    pub fn sandwich(&self) -> (f64, f64) {
        (self.c_lo, self.c_hi)
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: d,
            });
        }
        Ok(())
    }

    /// `ν(x)`; the caller guarantees `x.len() == dim`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Sup => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormKind::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::Lp(p) => {
                // scale by the largest entry to avoid overflow for large p
                let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v.abs() / m).powf(*p)).sum::<f64>().powf(1.0 / p)
            }
            NormKind::Cylindrical(eta) => {
                let (head, z) = x.split_at(self.dim - 1);
                eta.value(head).max(z[0].abs())
            }
        }
    }

    pub fn is_euclidean(&self) -> bool {
        match self.kind {
            NormKind::Euclidean => true,
            NormKind::Lp(p) => p == 2.0,
            _ => false,
        }
    }
}

/// `ν(x)` with a dimension check.
pub fn norm_value(nu: &NormDescriptor, x: &[f64]) -> Result<f64> {
    nu.check_dim(x.len())?;
    Ok(nu.value(x))
}

/// `‖x‖_α = max_i |x_i|^{1/α_i}`.
pub fn quasi_norm(x: &[f64], weights: &[f64]) -> Result<f64> {
    if x.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: x.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("quasi-norm weights must be positive".into()));
    }
    Ok(x
        .iter()
        .zip(weights)
        .map(|(v, w)| v.abs().powf(1.0 / w))
        .fold(0.0, f64::max))
}

#[derive(Serialize, Deserialize)]
struct NormJson {
    kind: String,
    #[serde(default)]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<Box<NormJson>>,
}

impl NormJson {
    fn from_desc(n: &NormDescriptor) -> Self {
        let (kind, p, eta) = match &n.kind {
            NormKind::Sup => ("sup", None, None),
            NormKind::Euclidean => ("euclidean", None, None),
            NormKind::Lp(p) => ("lp", Some(*p), None),
            NormKind::Cylindrical(e) => ("cylindrical", None, Some(Box::new(Self::from_desc(e)))),
        };
        NormJson {
            kind: kind.into(),
            d: Some(n.dim),
            p,
            eta,
        }
    }

    fn into_desc(self, dim_hint: Option<usize>) -> Result<NormDescriptor> {
        let dim = self.d.or(dim_hint).ok_or_else(|| {
            Error::InvalidInput("norm descriptor needs a dimension \"d\"".into())
        })?;
        let kind = match self.kind.as_str() {
            "sup" => NormKind::Sup,
            "euclidean" | "euclid" => NormKind::Euclidean,
            "lp" => NormKind::Lp(
                self.p
                    .ok_or_else(|| Error::InvalidInput("lp norm needs \"p\"".into()))?,
            ),
            "cylindrical" | "cyl" => {
                let eta = self
                    .eta
                    .ok_or_else(|| Error::InvalidInput("cylindrical norm needs \"eta\"".into()))?;
                NormKind::Cylindrical(Box::new(eta.into_desc(Some(dim.saturating_sub(1)))?))
            }
            other => return Err(Error::InvalidInput(format!("unknown norm kind {other:?}"))),
        };
        NormDescriptor::new(kind, dim)
    }
}

impl Serialize for NormDescriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NormJson::from_desc(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NormDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        NormJson::deserialize(de)?
            .into_desc(None)
            .map_err(D::Error::custom)
    }
}
