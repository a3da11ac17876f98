//! Upper-bound base for the chromatic number of spheres S^{d−1}(R) with unit
//! forbidden distance, and the trivial small-radius values.
//!
//! The bound has the form (base(R) + o(1))^d. Only the base is computed; the
//! o(1) term has no explicit rate and is reported as zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_range, Result};

/// Radii above this threshold admit the bound.
pub fn threshold() -> f64 {
    5f64.sqrt() / 2.0
}

/// √(5 − 2/R² + 4√(1 − (5R²−1)/(4R⁴))) for R > √5/2.
pub fn prosanov_base(r: f64) -> Result<f64> {
    if !(r > threshold()) || !r.is_finite() {
        return Err(out_of_range(format!("R = {r} is not above √5/2")));
    }
    let r2 = r * r;
    // 1 − (5R²−1)/(4R⁴) = (4R²−1)(R²−1)/(4R⁴), no cancellation for large R.
    let inner = (4.0 * r2 - 1.0) * (r2 - 1.0) / (4.0 * r2 * r2);
    Ok((5.0 - 2.0 / r2 + 4.0 * inner.sqrt()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrivialChromatic {
    One,
    Two,
    Unknown,
}

pub fn chromatic_trivial(r: f64) -> Result<TrivialChromatic> {
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    Ok(if r < 0.5 {
        TrivialChromatic::One
    } else if r == 0.5 {
        TrivialChromatic::Two
    } else {
        TrivialChromatic::Unknown
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    TrivialOne,
    TrivialTwo,
    BoundApplies,
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaticBoundRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub base: Option<f64>,
    pub regime: Regime,
}

pub fn chromatic_row(r: f64) -> Result<ChromaticBoundRow> {
    let regime = match chromatic_trivial(r)? {
        TrivialChromatic::One => Regime::TrivialOne,
        TrivialChromatic::Two => Regime::TrivialTwo,
        TrivialChromatic::Unknown if r > threshold() => Regime::BoundApplies,
        TrivialChromatic::Unknown => Regime::OutOfRange,
    };
    let base = if regime == Regime::BoundApplies { Some(prosanov_base(r)?) } else { None };
    Ok(ChromaticBoundRow { r, base, regime })
}

pub fn chromatic_table(radii: &[f64]) -> Result<Vec<ChromaticBoundRow>> {
    radii.iter().map(|&r| chromatic_row(r)).collect()
}
