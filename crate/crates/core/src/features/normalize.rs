//! Percentile clipping followed by min-max scaling, fit on training rows.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNorm {
    pub name: String,
    /// Value at the lower clip percentile; maps to 0.
    pub lo: f64,
    /// Value at the upper clip percentile; maps to 1.
    pub hi: f64,
    /// Median of the finite training values, used for missing entries.
    pub median: f64,
    #[serde(default)]
    pub constant: bool,
}

impl ColumnNorm {
    pub fn apply(&self, v: f64) -> f64 {
        let v = if v.is_finite() { v } else { self.median };
        if self.constant {
            return 0.5;
        }
        ((v.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Linearly interpolated percentile of sorted data (`p` in [0, 100]).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let t = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

/// Fits one column from its training values. Non-finite entries count as
/// missing and are ignored.
pub fn fit_column(name: &str, values: impl IntoIterator<Item = f64>, p_low: f64, p_high: f64) -> Result<ColumnNorm> {
    if !(0.0..=100.0).contains(&p_low) || !(0.0..=100.0).contains(&p_high) || p_low >= p_high {
        return Err(Error::InvalidParameter(format!("clip percentiles must satisfy 0 <= low < high <= 100, got {p_low}, {p_high}")));
    }
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        warn!("feature column {name} has no finite training values; mapped to 0.5");
        return Ok(ColumnNorm { name: name.into(), lo: 0.0, hi: 0.0, median: 0.0, constant: true });
    }
    v.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&v, p_low);
    let hi = percentile_sorted(&v, p_high);
    let median = percentile_sorted(&v, 50.0);
    let constant = !(hi > lo);
    if constant {
        warn!("feature column {name} is constant over its clip range; mapped to 0.5");
    }
    Ok(ColumnNorm { name: name.into(), lo, hi, median, constant })
}
