use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::{moving_median, savitzky_golay};
use crate::{Error, Result};

/// Crossings closer than this to the last counted one are ignored.
pub const DEFAULT_REFRACTORY_S: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    #[default]
    Elbow,
    ThumbMcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RomMeasure {
    pub value_deg: f64,
    pub joint: Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepCount {
    pub count: u32,
    pub rate_per_min: f64,
    pub refractory_s: f64,
}

/// Moving median of 5 followed by a 9-point cubic Savitzky–Golay fit, the
/// same chain used on the IMU. Traces shorter than the fit pass through.
pub fn smooth_kinematic(trace: &[f64]) -> Result<Vec<f64>> {
    if trace.len() < 9 {
        return Ok(trace.to_vec());
    }
    savitzky_golay(&moving_median(trace, 5)?, 9, 3)
}

pub fn rom(angle_trace: &[f64]) -> Result<RomMeasure> {
    rom_for(angle_trace, Joint::Elbow)
}

/// Peak-to-peak excursion of the trace as given.
pub fn rom_for(angle_trace: &[f64], joint: Joint) -> Result<RomMeasure> {
    let first = *angle_trace.first().ok_or(Error::EmptyInput)?;
    let (lo, hi) = angle_trace
        .iter()
        .fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(RomMeasure {
        value_deg: hi - lo,
        joint,
    })
}

/// Upward crossings of the trace mean, each at least `refractory_s` after
/// the previously counted one, normalized to the trace duration in minutes.
pub fn count_reps(trace: &[f64], rate_hz: f64, refractory_s: f64) -> RepCount {
    let count = upward_crossings(trace, rate_hz, refractory_s, None);
    let minutes = trace.len() as f64 / rate_hz / 60.0;
    RepCount {
        count,
        rate_per_min: if minutes > 0.0 { count as f64 / minutes } else { 0.0 },
        refractory_s,
    }
}

/// Counting core shared with the session path, which fixes the mean across
/// gap-separated runs.
pub(crate) fn upward_crossings(trace: &[f64], rate_hz: f64, refractory_s: f64, mean: Option<f64>) -> u32 {
    if trace.len() < 2 {
        return 0;
    }
    let mean = mean.unwrap_or_else(|| trace.iter().sum::<f64>() / trace.len() as f64);
    let min_gap = refractory_s * rate_hz;
    let mut last: Option<usize> = None;
    let mut count = 0;
    for i in 1..trace.len() {
        if trace[i - 1] < mean && trace[i] >= mean {
            if last.map_or(true, |l| ((i - l) as f64) >= min_gap) {
                count += 1;
                last = Some(i);
            }
        }
    }
    count
}
