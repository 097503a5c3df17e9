use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::{moving_median, savitzky_golay, welch_psd, PsdEstimate};
use crate::{Error, Result};

pub const TI_BAND_HZ: (f64, f64) = (4.0, 12.0);
pub const TI_REFERENCE_BAND_HZ: (f64, f64) = (0.5, 20.0);

/// Reference-band power below this is treated as a motionless trace.
const NO_MOTION_POWER: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TremorIndex {
    pub value: f64,
    pub band_hz: (f64, f64),
    pub reference_band_hz: (f64, f64),
    pub window_start_s: f64,
}

/// 4–12 Hz over 0.5–20 Hz acceleration power, both by trapezoid on the PSD
/// grid with interpolated band edges.
pub fn tremor_index(psd: &PsdEstimate) -> Result<TremorIndex> {
    if psd.nyquist_hz() < TI_REFERENCE_BAND_HZ.1 {
        return Err(Error::invalid("psd", "grid must reach 20 Hz"));
    }
    let den = psd.band_power(TI_REFERENCE_BAND_HZ.0, TI_REFERENCE_BAND_HZ.1);
    if !(den > NO_MOTION_POWER) {
        return Err(Error::NoMotion);
    }
    let num = psd.band_power(TI_BAND_HZ.0, TI_BAND_HZ.1);
    Ok(TremorIndex {
        value: (num / den).clamp(0.0, 1.0),
        band_hz: TI_BAND_HZ,
        reference_band_hz: TI_REFERENCE_BAND_HZ,
        window_start_s: 0.0,
    })
}

/// Tremor analysis settings: a rolling buffer refreshed at the window hop,
/// Welch over shorter overlapping segments inside it, and the IMU smoothing
/// chain applied first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiSettings {
    pub buffer_s: f64,
    pub hop_s: f64,
    pub segment_s: f64,
    pub overlap_frac: f64,
    pub median_len: usize,
    pub sg_len: usize,
    pub sg_order: usize,
}

impl Default for TiSettings {
    fn default() -> Self {
        Self {
            buffer_s: 2.0,
            hop_s: 0.125,
            segment_s: 1.0,
            overlap_frac: 0.5,
            median_len: 5,
            sg_len: 9,
            sg_order: 3,
        }
    }
}

impl TiSettings {
    pub(crate) fn lengths(&self, rate_hz: f64) -> (usize, usize, usize) {
        let n = |s: f64| libm::floor(s * rate_hz + 1e-9) as usize;
        (n(self.buffer_s), n(self.hop_s), n(self.segment_s))
    }

    pub(crate) fn ti_of_buffer(&self, buf: &[f64], rate_hz: f64) -> Result<f64> {
        let (_, _, seg) = self.lengths(rate_hz);
        let psd = welch_psd(buf, rate_hz, seg, self.overlap_frac)?;
        Ok(tremor_index(&psd)?.value)
    }
}

/// TI for every full buffer of a contiguous acceleration run. The run is
/// smoothed (moving median, then Savitzky–Golay), and buffers end at
/// `buffer + k·hop`. Window times are buffer starts relative to the run.
pub fn ti_series(accel: &[f64], rate_hz: f64, settings: &TiSettings) -> Result<Vec<TremorIndex>> {
    let (buf, hop, _) = settings.lengths(rate_hz);
    if buf == 0 || hop == 0 || accel.len() < buf {
        return Ok(Vec::new());
    }
    let smoothed = savitzky_golay(&moving_median(accel, settings.median_len)?, settings.sg_len, settings.sg_order)?;
    let mut out = Vec::new();
    let mut end = buf;
    let mut k = 0;
    while end <= smoothed.len() {
        let value = settings
            .ti_of_buffer(&smoothed[end - buf..end], rate_hz)
            .map_err(|e| e.at_window(k))?;
        out.push(TremorIndex {
            value,
            band_hz: TI_BAND_HZ,
            reference_band_hz: TI_REFERENCE_BAND_HZ,
            window_start_s: (end - buf) as f64 / rate_hz,
        });
        end += hop;
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn tone(f: f64, amp: f64, rate: f64, secs: f64) -> Vec<f64> {
        (0..(rate * secs) as usize)
            .map(|i| amp * libm::sin(2.0 * PI * f * i as f64 / rate))
            .collect()
    }

    fn ti_of(x: &[f64]) -> f64 {
        tremor_index(&welch_psd(x, 200.0, 200, 0.5).unwrap()).unwrap().value
    }

    #[test]
    fn pure_tones() {
        assert!(ti_of(&tone(8.0, 1.0, 200.0, 10.0)) >= 0.98);
        assert!(ti_of(&tone(2.0, 1.0, 200.0, 10.0)) <= 0.02);
    }

    #[test]
    fn equal_power_pair_from_bins() {
        let a = tone(2.0, 1.0, 200.0, 10.0);
        let b = tone(8.0, 1.0, 200.0, 10.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let psd = welch_psd(&x, 200.0, 200, 0.5).unwrap();
        // Oracle: trapezoid straight over the bins, all edges on-grid here.
        let trap = |lo: f64, hi: f64| {
            let pts: Vec<(f64, f64)> = psd
                .freqs_hz
                .iter()
                .zip(&psd.power)
                .filter(|(f, _)| **f >= lo && **f <= hi)
                .map(|(f, p)| (*f, *p))
                .collect();
            pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum::<f64>()
        };
        let oracle = trap(4.0, 12.0) / (trap(0.0, 20.0) - trap(0.0, 0.5));
        let ti = tremor_index(&psd).unwrap().value;
        assert!((ti - 0.5).abs() <= 0.02, "{ti}");
        assert!((ti - oracle).abs() < 0.01, "{ti} vs {oracle}");
    }

    #[test]
    fn motionless_is_an_error() {
        let psd = welch_psd(&[9.81; 400], 200.0, 200, 0.5).unwrap();
        assert_eq!(tremor_index(&psd), Err(Error::NoMotion));
    }

    #[test]
    fn scale_invariant() {
        let x: Vec<f64> = tone(2.0, 1.0, 200.0, 4.0)
            .iter()
            .zip(tone(7.0, 0.5, 200.0, 4.0))
            .map(|(a, b)| a + b)
            .collect();
        let mut psd = welch_psd(&x, 200.0, 200, 0.5).unwrap();
        let before = tremor_index(&psd).unwrap().value;
        psd.power.iter_mut().for_each(|p| *p *= 9.0);
        assert!((tremor_index(&psd).unwrap().value - before).abs() < 1e-12);
    }

    #[test]
    fn series_window_count() {
        let x = tone(8.0, 1.0, 200.0, 4.0);
        // buffers of 400 ending at 400, 425, ..., 800 → 17
        let s = ti_series(&x, 200.0, &TiSettings::default()).unwrap();
        assert_eq!(s.len(), 17);
        assert!(s.iter().all(|t| t.value > 0.95));
        assert_eq!(s[1].window_start_s, 0.125);
    }
}
