//! Conversions between the approximation side `(t, c)` and the flow side
//! `(s, r)` of the Dani correspondence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{critical_radius, NormDescriptor};
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaniDirection {
    /// `t ↦ s = ½ ln(t²/c)`
    HorizonToTime,
    /// `s ↦ t = √c·e^s`
    TimeToHorizon,
    /// `c ↦ r(c) = r_ν·max{c^{α_i/2}, c^{β_j/2}}`
    CToRadius,
    /// `r ↦ c(r) = (r/r_ν)^{2/γ}`
    RadiusToC,
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("c must lie in (0, 1], got {c}")));
    }
    Ok(())
}

pub fn horizon_to_time(t: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if !(t > c.sqrt()) || !t.is_finite() {
        return Err(Error::Domain(format!("t must exceed √c = {}, got {t}", c.sqrt())));
    }
    Ok(0.5 * (t * t / c).ln())
}

pub fn time_to_horizon(s: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if !s.is_finite() {
        return Err(Error::Domain(format!("s must be finite, got {s}")));
    }
    Ok(c.sqrt() * s.exp())
}

pub fn radius_from_c(c: f64, w: &WeightVector, r_nu: f64) -> Result<f64> {
    check_c(c)?;
    let m = w
        .alpha()
        .iter()
        .chain(w.beta())
        .map(|x| c.powf(x / 2.0))
        .fold(f64::MIN, f64::max);
    Ok(r_nu * m)
}

pub fn c_from_radius(r: f64, w: &WeightVector, r_nu: f64) -> Result<f64> {
    if !(r > 0.0 && r <= r_nu) {
        return Err(Error::Domain(format!("r must lie in (0, r_ν = {r_nu}], got {r}")));
    }
    Ok((r / r_nu).powf(2.0 / w.gamma()))
}

/// Dispatches one of the four conversions. `c` is used by the time/horizon
/// directions and ignored otherwise; radius directions use `r_ν` of `nu`.
pub fn dani_convert(
    direction: DaniDirection,
    value: f64,
    c: f64,
    w: &WeightVector,
    nu: &NormDescriptor,
) -> Result<f64> {
    match direction {
        DaniDirection::HorizonToTime => horizon_to_time(value, c),
        DaniDirection::TimeToHorizon => time_to_horizon(value, c),
        DaniDirection::CToRadius => radius_from_c(value, w, critical_radius(nu)?.value),
        DaniDirection::RadiusToC => c_from_radius(value, w, critical_radius(nu)?.value),
    }
}
