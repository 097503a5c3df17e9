use serde::{Deserialize, Serialize};

use crate::num;

pub const LARGE_EFFECT_LABEL: &str = "paired sign: large effect";

/// Sign-based Cliff's δ: `(#positive − #negative)/n`. Zeros count in `n`
/// only. An empty input gives 0.
pub fn cliffs_delta_signed(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    let pos = deltas.iter().filter(|d| **d > 0.0).count() as f64;
    let neg = deltas.iter().filter(|d| **d < 0.0).count() as f64;
    (pos - neg) / deltas.len() as f64
}

/// The qualitative label attached when `|δ| ≥ 0.8`.
pub fn effect_label(delta: f64) -> Option<&'static str> {
    (libm::fabs(delta) >= 0.8).then_some(LARGE_EFFECT_LABEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimmedMean {
    pub value: f64,
    pub trim_frac: f64,
    /// Values removed from each tail.
    pub trimmed_each_side: usize,
    /// Set when the sample was too small to remove anything, so `value` is
    /// the plain mean.
    pub untrimmed_fallback: bool,
}

/// Mean after dropping `⌊trim·n⌋` values from each tail. Returns `None` for
/// empty input or a trim fraction outside `[0, 0.5)`.
pub fn trimmed_mean(values: &[f64], trim_frac: f64) -> Option<TrimmedMean> {
    if values.is_empty() || !(0.0..0.5).contains(&trim_frac) {
        return None;
    }
    let n = values.len();
    let g = libm::floor(trim_frac * n as f64 + 1e-12) as usize;
    let fallback = trim_frac > 0.0 && (g == 0 || 2 * g >= n);
    let g = if 2 * g >= n { 0 } else { g };
    let v = num::sorted(values);
    let kept = &v[g..n - g];
    Some(TrimmedMean {
        value: kept.iter().sum::<f64>() / kept.len() as f64,
        trim_frac,
        trimmed_each_side: g,
        untrimmed_fallback: fallback,
    })
}
