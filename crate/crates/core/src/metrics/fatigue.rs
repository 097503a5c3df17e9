use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::{filter_stream, median_frequency, welch_psd, windowize, FilterSpec, StreamFilter};
use crate::{Error, Result};

pub const FMED_BAND_HZ: (f64, f64) = (20.0, 450.0);

/// Windows starting earlier than this into a run are skipped while the
/// band-pass settles.
pub const FMED_SETTLE_S: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    TheilSen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueTrend {
    pub slope_hz_per_min: f64,
    pub intercept_hz: f64,
    pub n_windows: usize,
    pub fit_method: FitMethod,
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (_, hi, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Median of pairwise slopes over pairs with distinct `x`, and the median
/// residual intercept.
pub fn theil_sen(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!("{} points, need 2", points.len())));
    }
    let mut slopes = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, &(xi, yi)) in points.iter().enumerate() {
        for &(xj, yj) in &points[i + 1..] {
            if xj != xi {
                slopes.push((yj - yi) / (xj - xi));
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::IdenticalTimestamps);
    }
    let slope = median_in_place(&mut slopes);
    let mut resid: Vec<f64> = points.iter().map(|&(x, y)| y - slope * x).collect();
    Ok((slope, median_in_place(&mut resid)))
}

/// Robust trend of a median-frequency series given as (seconds, Hz); the
/// slope is reported per minute.
pub fn fatigue_slope(fmed_series: &[(f64, f64)]) -> Result<FatigueTrend> {
    let (slope_per_s, intercept) = theil_sen(fmed_series)?;
    Ok(FatigueTrend {
        slope_hz_per_min: slope_per_s * 60.0,
        intercept_hz: intercept,
        n_windows: fmed_series.len(),
        fit_method: FitMethod::TheilSen,
    })
}

/// EMG preprocessing: 4th-order 20–450 Hz band-pass, then the mains notch.
pub fn emg_chain(rate_hz: f64, mains_hz: f64) -> Result<[StreamFilter; 2]> {
    Ok([
        filter_stream(&FilterSpec::emg_bandpass(), rate_hz)?,
        filter_stream(&FilterSpec::mains_notch(mains_hz), rate_hz)?,
    ])
}

/// Per-window median frequency of one contiguous raw EMG run. Times are
/// window centers relative to the run start.
pub fn fmed_series(emg: &[f64], rate_hz: f64, mains_hz: f64) -> Result<Vec<(f64, f64)>> {
    let mut chain = emg_chain(rate_hz, mains_hz)?;
    let filtered: Vec<f64> = emg
        .iter()
        .map(|&x| chain.iter_mut().fold(x, |acc, f| f.process(acc)))
        .collect();
    let mut out = Vec::new();
    for (k, w) in windowize(&filtered, rate_hz).enumerate() {
        if w.start_time_s < FMED_SETTLE_S - 1e-12 {
            continue;
        }
        let psd = welch_psd(w.samples, rate_hz, w.samples.len(), 0.0)?;
        let f = median_frequency(&psd, FMED_BAND_HZ).map_err(|e| e.at_window(k))?;
        out.push((w.start_time_s + 0.5 * w.duration_s(), f));
    }
    Ok(out)
}

/// Brute-force median of all pairwise slopes, for tests.
#[cfg(test)]
pub(crate) fn pairwise_median_oracle(points: &[(f64, f64)]) -> f64 {
    let mut s = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i < j && points[i].0 != points[j].0 {
                s.push((points[j].1 - points[i].1) / (points[j].0 - points[i].0));
            }
        }
    }
    crate::num::median(&s).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_exact() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 6.0, 100.0 - 0.5 * i as f64 * 6.0 / 60.0)).collect();
        let t = fatigue_slope(&pts).unwrap();
        assert!((t.slope_hz_per_min + 0.5).abs() < 1e-12);
        assert!((t.intercept_hz - 100.0).abs() < 1e-9);
        assert_eq!(t.n_windows, 20);
    }

    #[test]
    fn outlier_is_ignored() {
        let mut pts: Vec<(f64, f64)> = (0..30).map(|i| (i as f64 * 4.0, 90.0 + 0.1 * i as f64 * 4.0 / 60.0)).collect();
        pts[13].1 += 40.0;
        let t = fatigue_slope(&pts).unwrap();
        assert!((t.slope_hz_per_min - 0.1).abs() <= 0.005);
        assert_eq!(t.slope_hz_per_min / 60.0, pairwise_median_oracle(&pts));
    }

    #[test]
    fn two_points() {
        let t = fatigue_slope(&[(0.0, 100.0), (30.0, 99.0)]).unwrap();
        assert!((t.slope_hz_per_min + 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_times_rejected() {
        assert_eq!(fatigue_slope(&[(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)]), Err(Error::IdenticalTimestamps));
        assert!(fatigue_slope(&[(5.0, 1.0)]).is_err());
    }
}
