use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Weights `ω = (α, β)`: positive reals, each side summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightVector {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        WeightVector::new(raw.alpha, raw.beta)
    }
}

impl From<WeightVector> for RawWeights {
    fn from(w: WeightVector) -> Self {
        RawWeights {
            alpha: w.alpha,
            beta: w.beta,
        }
    }
}

fn check_side(name: &str, side: &[f64]) -> Result<()> {
    if side.is_empty() {
        return Err(Error::InvalidInput(format!("{name} must be non-empty")));
    }
    if side.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "{name} entries must be positive and finite"
        )));
    }
    let sum: f64 = side.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "{name} must sum to 1 (got {sum})"
        )));
    }
    Ok(())
}

impl WeightVector {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        check_side("alpha", &alpha)?;
        check_side("beta", &beta)?;
        Ok(WeightVector { alpha, beta })
    }

    /// Rescales arbitrary positive entries so that each side sums to one.
    pub fn normalized(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (mut a, mut b) = (norm(alpha), norm(beta));
        // absorb rounding into the last entry
        for side in [&mut a, &mut b] {
            let k = side.len();
            if k > 0 {
                let head: f64 = side[..k - 1].iter().sum();
                side[k - 1] = 1.0 - head;
            }
        }
        Self::new(a, b)
    }

    /// The unweighted choice `α = (1/m, …)`, `β = (1/n, …)`.
    pub fn uniform(m: usize, n: usize) -> Self {
        Self::normalized(&vec![1.0; m], &vec![1.0; n]).expect("uniform weights are valid")
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn d(&self) -> usize {
        self.m() + self.n()
    }

    /// `γ = max_j β_j`.
    pub fn gamma(&self) -> f64 {
        self.beta.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Largest weight on either side; the Lipschitz constant of `log λ₁` along the flow.
    pub fn max_weight(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .copied()
            .fold(f64::MIN, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .copied()
            .fold(f64::MAX, f64::min)
    }

    /// Exponents of the flow diagonal: `(α_1, …, α_m, −β_1, …, −β_n)`.
    pub fn flow_exponents(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .copied()
            .chain(self.beta.iter().map(|b| -b))
            .collect()
    }

    /// Parses `a_1,…,a_m,b_1,…,b_n` given the split `m`.
    pub fn parse(text: &str, m: usize, n: usize) -> Result<Self> {
        let vals = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad weight {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != m + n {
            return Err(Error::DimensionMismatch {
                expected: m + n,
                found: vals.len(),
            });
        }
        Self::normalized(&vals[..m], &vals[m..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums_and_signs() {
        assert!(WeightVector::new(vec![0.5, 0.6], vec![1.0]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5], vec![1.0]).is_err());
        assert!(WeightVector::new(vec![], vec![1.0]).is_err());
        assert!(WeightVector::new(vec![0.3, 0.7], vec![1.0]).is_ok());
    }

    #[test]
    fn gamma_is_max_beta() {
        let w = WeightVector::new(vec![1.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(w.gamma(), 0.75);
        assert_eq!(w.min_weight(), 0.25);
        assert_eq!(w.flow_exponents(), vec![1.0, -0.25, -0.75]);
    }

    #[test]
    fn parse_normalizes_each_side() {
        let w = WeightVector::parse("1,1", 1, 1).unwrap();
        assert_eq!(w.alpha(), &[1.0]);
        let w = WeightVector::parse("1,3,2", 2, 1).unwrap();
        assert!((w.alpha()[0] - 0.25).abs() < 1e-15);
        assert!(WeightVector::parse("1,1", 2, 1).is_err());
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"alpha":[0.2],"beta":[1.0]}"#;
        assert!(serde_json::from_str::<WeightVector>(bad).is_err());
        let good = r#"{"alpha":[0.5,0.5],"beta":[1.0]}"#;
        let w: WeightVector = serde_json::from_str(good).unwrap();
        assert_eq!(w.m(), 2);
    }
}
