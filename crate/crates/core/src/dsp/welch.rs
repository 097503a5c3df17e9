//! Welch power spectral density: averaged, Hann-tapered, mean-detrended
//! periodograms with one-sided density normalization, so that
//! `Σ power·Δf` equals the (taper-weighted) mean square of the input.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fft::{fft_in_place, Complex};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Ascending grid `k·rate/segment_len`, k = 0..=segment_len/2.
    pub freqs_hz: Vec<f64>,
    /// One-sided density per bin (units²/Hz), never negative.
    pub power: Vec<f64>,
    pub segment_len: usize,
    pub overlap_frac: f64,
    pub taper: Taper,
    pub segments: usize,
}

impl PsdEstimate {
    pub fn bin_width_hz(&self) -> f64 {
        if self.freqs_hz.len() < 2 {
            0.0
        } else {
            self.freqs_hz[1] - self.freqs_hz[0]
        }
    }

    /// Rectangle-rule total power over [0, Nyquist].
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width_hz()
    }

    fn density_at(&self, f: f64) -> f64 {
        let df = self.bin_width_hz();
        let pos = f / df;
        let lo = libm::floor(pos) as usize;
        if lo + 1 >= self.power.len() {
            return *self.power.last().unwrap_or(&0.0);
        }
        let t = pos - lo as f64;
        self.power[lo] * (1.0 - t) + self.power[lo + 1] * t
    }

    /// Trapezoidal integral of the density over `[low_hz, high_hz]`; band
    /// edges falling between bins are linearly interpolated.
    pub fn band_power(&self, low_hz: f64, high_hz: f64) -> f64 {
        let df = self.bin_width_hz();
        if df <= 0.0 || high_hz <= low_hz {
            return 0.0;
        }
        let mut knots: Vec<(f64, f64)> = Vec::new();
        knots.push((low_hz, self.density_at(low_hz)));
        for (f, p) in self.freqs_hz.iter().zip(&self.power) {
            if *f > low_hz && *f < high_hz {
                knots.push((*f, *p));
            }
        }
        knots.push((high_hz, self.density_at(high_hz)));
        knots
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    pub fn nyquist_hz(&self) -> f64 {
        *self.freqs_hz.last().unwrap_or(&0.0)
    }
}

pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Welch estimate with a periodic Hann taper.
pub fn welch_psd(samples: &[f64], rate_hz: f64, segment_len: usize, overlap_frac: f64) -> Result<PsdEstimate> {
    if !(rate_hz > 0.0) {
        return Err(Error::invalid("rate_hz", "must be positive"));
    }
    if segment_len < 2 {
        return Err(Error::invalid("segment_len", "need at least 2 samples"));
    }
    if !(0.0..=0.9).contains(&overlap_frac) {
        return Err(Error::invalid("overlap_frac", "must lie in [0, 0.9]"));
    }
    if segment_len > samples.len() {
        return Err(Error::SegmentTooLong {
            segment: segment_len,
            len: samples.len(),
        });
    }
    let overlap = libm::round(overlap_frac * segment_len as f64) as usize;
    let hop = (segment_len - overlap).max(1);
    let taper = hann(segment_len);
    let s2: f64 = taper.iter().map(|w| w * w).sum();
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::ZERO; segment_len];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_len <= samples.len() {
        let seg = &samples[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&taper) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft_in_place(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (rate_hz * s2 * segments as f64);
    let even = segment_len % 2 == 0;
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || (even && k == bins - 1) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let freqs_hz = (0..bins).map(|k| k as f64 * rate_hz / segment_len as f64).collect();
    Ok(PsdEstimate {
        freqs_hz,
        power,
        segment_len,
        overlap_frac,
        taper: Taper::Hann,
        segments,
    })
}
