use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signalgen::rng::Stream;
use crate::{num, Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 1_000;

/// Bootstrap interval with its ingredients. `percentile_*` uses the same
/// resamples without bias or skew correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub z0: f64,
    pub acceleration: f64,
    pub percentile_low: f64,
    pub percentile_high: f64,
}

/// Resample statistics, drawn in resample-index order from one stream.
fn resample_stats(data: &[f64], statistic: &dyn Fn(&[f64]) -> f64, b: usize, seed: u64) -> Vec<f64> {
    let n = data.len();
    let mut rng = Stream::new(seed);
    let mut buf = Vec::with_capacity(n);
    (0..b)
        .map(|_| {
            buf.clear();
            buf.extend((0..n).map(|_| data[rng.below(n)]));
            statistic(&buf)
        })
        .collect()
}

fn jackknife_acceleration(data: &[f64], statistic: &dyn Fn(&[f64]) -> f64) -> f64 {
    let n = data.len();
    let mut buf = Vec::with_capacity(n - 1);
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(data.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
            statistic(&buf)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for t in &loo {
        let d = mean - t;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 <= 0.0 {
        0.0
    } else {
        s3 / (6.0 * libm::pow(s2, 1.5))
    }
}

/// Bias-corrected and accelerated bootstrap interval at `confidence`.
///
/// `z0` comes from the share of resample statistics below the estimate,
/// with ties counted half. The acceleration is the jackknife skewness
/// `Σ(θ̄−θ₍ᵢ₎)³ / (6·(Σ(θ̄−θ₍ᵢ₎)²)^1.5)`. Endpoints are linearly
/// interpolated quantiles of the sorted resample statistics at
/// `Φ(z0 + (z0+z)/(1−a(z0+z)))`. Constant data yields `(c, c)`.
pub fn bca_ci(data: &[f64], statistic: &dyn Fn(&[f64]) -> f64, b: usize, confidence: f64, seed: u64) -> Result<BootstrapCi> {
    if data.len() < 3 {
        return Err(Error::InsufficientData(alloc::format!("bootstrap needs n ≥ 3, got {}", data.len())));
    }
    if b < MIN_RESAMPLES {
        return Err(Error::invalid("b_resamples", "must be at least 1000"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence", "must lie in (0, 1)"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("data", "must be finite"));
    }
    let estimate = statistic(data);
    if data.iter().all(|x| *x == data[0]) {
        return Ok(BootstrapCi {
            estimate,
            low: estimate,
            high: estimate,
            z0: 0.0,
            acceleration: 0.0,
            percentile_low: estimate,
            percentile_high: estimate,
        });
    }
    let mut stats = resample_stats(data, statistic, b, seed);
    stats.sort_by(f64::total_cmp);

    let below = stats.iter().filter(|s| **s < estimate).count() as f64;
    let equal = stats.iter().filter(|s| **s == estimate).count() as f64;
    let frac = ((below + 0.5 * equal) / b as f64).clamp(0.5 / b as f64, 1.0 - 0.5 / b as f64);
    let z0 = num::normal_quantile(frac);
    let acceleration = jackknife_acceleration(data, statistic);

    let alpha = 0.5 * (1.0 - confidence);
    let adjusted = |z: f64| {
        let s = z0 + z;
        num::normal_cdf(z0 + s / (1.0 - acceleration * s))
    };
    let z_lo = num::normal_quantile(alpha);
    let z_hi = num::normal_quantile(1.0 - alpha);
    Ok(BootstrapCi {
        estimate,
        low: num::quantile_sorted(&stats, adjusted(z_lo)),
        high: num::quantile_sorted(&stats, adjusted(z_hi)),
        z0,
        acceleration,
        percentile_low: num::quantile_sorted(&stats, alpha),
        percentile_high: num::quantile_sorted(&stats, 1.0 - alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn median(x: &[f64]) -> f64 {
        num::median(x).unwrap()
    }

    fn mean(x: &[f64]) -> f64 {
        num::mean(x).unwrap()
    }

    #[test]
    fn constant_data_collapses() {
        let ci = bca_ci(&[0.3; 8], &median, 2000, 0.95, 1).unwrap();
        assert_eq!((ci.low, ci.high), (0.3, 0.3));
    }

    #[test]
    fn symmetric_mean_matches_percentile() {
        let x: Vec<f64> = (-10..=10).map(|i| i as f64).collect();
        let ci = bca_ci(&x, &mean, 10_000, 0.95, 7).unwrap();
        assert!(ci.acceleration.abs() < 1e-12);
        assert!(ci.z0.abs() < 0.05, "{}", ci.z0);
        let width = ci.percentile_high - ci.percentile_low;
        assert!((ci.low - ci.percentile_low).abs() < 0.05 * width);
        assert!((ci.high - ci.percentile_high).abs() < 0.05 * width);
    }

    #[test]
    fn same_seed_same_interval() {
        let x = [0.1, -0.3, 0.25, 0.7, -0.05, 0.4];
        let a = bca_ci(&x, &median, 3000, 0.95, 11).unwrap();
        let b = bca_ci(&x, &median, 3000, 0.95, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions() {
        assert!(bca_ci(&[1.0, 2.0], &median, 2000, 0.95, 0).is_err());
        assert!(bca_ci(&[1.0, 2.0, 3.0], &median, 999, 0.95, 0).is_err());
    }

    #[test]
    fn skewed_sample_has_positive_acceleration() {
        let x = [0.0, 0.1, 0.2, 0.3, 0.4, 5.0, 9.0];
        let ci = bca_ci(&x, &mean, 2000, 0.95, 3).unwrap();
        assert!(ci.acceleration > 0.0);
        assert!(ci.low <= ci.estimate && ci.estimate <= ci.high);
    }
}
