//! Per-window EMG amplitude/activity features and spectral median frequency.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::welch::PsdEstimate;
use super::window::Window;
use crate::{Error, Result};

/// Default zero-crossing hysteresis as a fraction of the window RMS.
pub const DEFAULT_HYSTERESIS_FRAC: f64 = 0.05;

/// Feature vector for one 250 ms window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub rms: f64,
    pub mav: f64,
    pub zc_count: u32,
    pub median_freq_hz: f64,
    pub ti: f64,
    pub window_start_s: f64,
}

impl WindowFeatures {
    pub fn is_finite(&self) -> bool {
        self.rms.is_finite()
            && self.mav.is_finite()
            && self.median_freq_hz.is_finite()
            && self.ti.is_finite()
            && self.window_start_s.is_finite()
    }
}

/// RMS, MAV and hysteresis-gated zero crossings of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmgFeatures {
    pub rms: f64,
    pub mav: f64,
    pub zc_count: u32,
}

fn zero_crossings(x: &[f64], hysteresis: f64) -> u32 {
    // Schmitt trigger: the sign state only changes once the signal clears
    // ±hysteresis, and only changes of an established state are counted.
    let mut state: i8 = 0;
    let mut count = 0;
    for &v in x {
        let s = if v > hysteresis {
            1
        } else if v < -hysteresis {
            -1
        } else {
            continue;
        };
        if state != 0 && s != state {
            count += 1;
        }
        state = s;
    }
    count
}

pub fn emg_features(window: &Window<'_>, hysteresis: f64) -> Result<EmgFeatures> {
    let x = window.samples;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let rms = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / n);
    let mav = x.iter().map(|v| libm::fabs(*v)).sum::<f64>() / n;
    Ok(EmgFeatures {
        rms,
        mav,
        zc_count: zero_crossings(x, hysteresis),
    })
}

/// [`emg_features`] with hysteresis at 5% of the window RMS.
pub fn emg_features_auto(window: &Window<'_>) -> Result<EmgFeatures> {
    let x = window.samples;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rms = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64);
    emg_features(window, DEFAULT_HYSTERESIS_FRAC * rms)
}

/// Frequency at which cumulative in-band power reaches half of the in-band
/// total, interpolating linearly between grid knots.
pub fn median_frequency(psd: &PsdEstimate, band_hz: (f64, f64)) -> Result<f64> {
    let (low, high) = band_hz;
    if !(low >= 0.0 && low < high && high <= psd.nyquist_hz()) {
        return Err(Error::invalid("band_hz", "band must lie within the PSD grid"));
    }
    let mut knots: Vec<(f64, f64)> = Vec::new();
    knots.push((low, interp(psd, low)));
    for (f, p) in psd.freqs_hz.iter().zip(&psd.power) {
        if *f > low && *f < high {
            knots.push((*f, *p));
        }
    }
    knots.push((high, interp(psd, high)));
    let areas: Vec<f64> = knots
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let half = 0.5 * total;
    let mut cum = 0.0;
    for (i, a) in areas.iter().enumerate() {
        if cum + a >= half && *a > 0.0 {
            let t = (half - cum) / a;
            return Ok(knots[i].0 + t * (knots[i + 1].0 - knots[i].0));
        }
        cum += a;
    }
    Ok(high)
}

fn interp(psd: &PsdEstimate, f: f64) -> f64 {
    let df = psd.bin_width_hz();
    let pos = f / df;
    let lo = libm::floor(pos) as usize;
    if lo + 1 >= psd.power.len() {
        return *psd.power.last().unwrap_or(&0.0);
    }
    let t = pos - lo as f64;
    psd.power[lo] * (1.0 - t) + psd.power[lo + 1] * t
}
