use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fatigue::{fatigue_slope, fmed_series};
use super::kinematics::{rom_for, smooth_kinematic, upward_crossings, Joint, DEFAULT_REFRACTORY_S};
use super::tremor::{ti_series, TiSettings};
use crate::session::{synchronize, ChannelKind, SessionRecord};
use crate::signalgen::TaskKind;
use crate::{num, Error, Result};

/// Per-session outcome summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcomes {
    pub ti_median: f64,
    pub rom_deg: f64,
    pub reps_per_min: f64,
    pub rep_count: u32,
    pub fmed_slope_hz_per_min: f64,
    pub n_ti_windows: usize,
    pub n_fmed_windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSettings {
    pub ti: TiSettings,
    pub refractory_s: f64,
    pub mains_hz: f64,
}

impl Default for OutcomeSettings {
    fn default() -> Self {
        Self {
            ti: TiSettings::default(),
            refractory_s: DEFAULT_REFRACTORY_S,
            mains_hz: 50.0,
        }
    }
}

/// Session outcomes with default settings.
pub fn session_outcomes(record: &SessionRecord) -> Result<SessionOutcomes> {
    session_outcomes_with(record, &OutcomeSettings::default())
}

/// Median window TI, ROM over the smoothed angle trace, reps over the whole
/// session and one Theil–Sen fatigue slope. Gaps split the data into runs;
/// nothing is interpolated across them.
pub fn session_outcomes_with(record: &SessionRecord, settings: &OutcomeSettings) -> Result<SessionOutcomes> {
    record.check_required_channels()?;
    let view = synchronize(&record.channels)?;

    let accel = view.get(ChannelKind::ImuAccel).ok_or(Error::MissingChannel(ChannelKind::ImuAccel))?;
    let mut ti_values = Vec::new();
    let mut window_base = 0;
    for run in accel.runs().iter() {
        let series = ti_series(run.samples, accel.sample_rate_hz, &settings.ti).map_err(|e| match e {
            Error::AtWindow { window, source } => Error::AtWindow {
                window: window + window_base,
                source,
            },
            other => other,
        })?;
        window_base += series.len();
        ti_values.extend(series.iter().map(|t| t.value));
    }
    let ti_median = num::median(&ti_values)
        .ok_or_else(|| Error::InsufficientData(alloc::string::String::from("no complete TI window")))?;

    let angle = view.get(ChannelKind::JointAngle).ok_or(Error::MissingChannel(ChannelKind::JointAngle))?;
    let joint = match record.task.task_kind {
        TaskKind::PinchGrip => Joint::ThumbMcp,
        _ => Joint::Elbow,
    };
    let runs = angle.runs();
    let smoothed: Vec<Vec<f64>> = runs.iter().map(|r| smooth_kinematic(r.samples)).collect::<Result<_>>()?;
    let all: Vec<f64> = smoothed.iter().flatten().copied().collect();
    let rom_deg = rom_for(&all, joint)?.value_deg;
    let mean = num::mean(&all).unwrap_or(0.0);
    let rep_count: u32 = smoothed
        .iter()
        .map(|s| upward_crossings(s, angle.sample_rate_hz, settings.refractory_s, Some(mean)))
        .sum();
    let reps_per_min = rep_count as f64 / (record.duration_s() / 60.0);

    let emg_kind = record.primary_emg().ok_or(Error::MissingChannel(ChannelKind::EmgTriceps))?;
    let emg = view.get(emg_kind).ok_or(Error::MissingChannel(emg_kind))?;
    let mut fmed = Vec::new();
    for run in emg.runs().iter() {
        let offset = run.start_index as f64 / emg.sample_rate_hz;
        let series = fmed_series(run.samples, emg.sample_rate_hz, settings.mains_hz)?;
        fmed.extend(series.into_iter().map(|(t, f)| (t + offset, f)));
    }
    let trend = fatigue_slope(&fmed)?;

    Ok(SessionOutcomes {
        ti_median,
        rom_deg,
        reps_per_min,
        rep_count,
        fmed_slope_hz_per_min: trend.slope_hz_per_min,
        n_ti_windows: ti_values.len(),
        n_fmed_windows: trend.n_windows,
    })
}
