//! Session data model: channels, sequence-numbered packets, session records,
//! time alignment, quality control and UI telemetry frames.

mod qc;
mod sync;
mod telemetry;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::SessionOutcomes;
use crate::signalgen::TaskSpec;
use crate::{Error, Result};

pub use qc::{channel_missingness, detect_clipping, mad_outliers, run_qc, QcSummary, DEFAULT_MAD_THRESHOLD, MAX_MISSINGNESS};
pub use sync::{synchronize, AlignedChannel, MultichannelView, NullSpan, Run, RunSet};
pub use telemetry::{packetize_for_ui, AssistSnapshot, FrameBuilder, SessionState, TelemetryFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    EmgTriceps,
    EmgEpb,
    ImuAccel,
    ImuGyro,
    ForceFlex,
    JointAngle,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 6] = [
        ChannelKind::EmgTriceps,
        ChannelKind::EmgEpb,
        ChannelKind::ImuAccel,
        ChannelKind::ImuGyro,
        ChannelKind::ForceFlex,
        ChannelKind::JointAngle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::EmgTriceps => "emg_triceps",
            ChannelKind::EmgEpb => "emg_epb",
            ChannelKind::ImuAccel => "imu_accel",
            ChannelKind::ImuGyro => "imu_gyro",
            ChannelKind::ForceFlex => "force_flex",
            ChannelKind::JointAngle => "joint_angle",
        }
    }

    pub fn is_emg(self) -> bool {
        matches!(self, ChannelKind::EmgTriceps | ChannelKind::EmgEpb)
    }

    /// Every acquired stream counts toward the >5% missingness gate.
    pub fn is_primary(self) -> bool {
        true
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

/// Acquisition settings for one channel. Samples travel as signed ADC codes;
/// `full_scale` is the physical magnitude of the most positive code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channel_kind: ChannelKind,
    pub sample_rate_hz: f64,
    pub resolution_bits: u8,
    pub full_scale: f64,
}

impl ChannelConfig {
    /// Default acquisition for `kind`: EMG 1 kHz/16-bit (±5 mV), IMU
    /// 200 Hz/16-bit (±4 g, ±500 °/s), flex 200 Hz/12-bit (3.3 V), joint
    /// angle 100 Hz/16-bit (±180°).
    pub fn default_for(kind: ChannelKind) -> Self {
        let (rate, bits, fs) = match kind {
            ChannelKind::EmgTriceps | ChannelKind::EmgEpb => (1000.0, 16, 5.0),
            ChannelKind::ImuAccel => (200.0, 16, 39.24),
            ChannelKind::ImuGyro => (200.0, 16, 500.0),
            ChannelKind::ForceFlex => (200.0, 12, 3.3),
            ChannelKind::JointAngle => (100.0, 16, 180.0),
        };
        Self {
            channel_kind: kind,
            sample_rate_hz: rate,
            resolution_bits: bits,
            full_scale: fs,
        }
    }

    pub fn default_set() -> Vec<ChannelConfig> {
        ChannelKind::ALL.into_iter().map(Self::default_for).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.sample_rate_hz;
        let ok = match self.channel_kind {
            ChannelKind::EmgTriceps | ChannelKind::EmgEpb => rate == 1000.0,
            ChannelKind::ImuAccel | ChannelKind::ImuGyro => (100.0..=200.0).contains(&rate),
            ChannelKind::ForceFlex => rate == 200.0,
            ChannelKind::JointAngle => (50.0..=200.0).contains(&rate),
        };
        if !ok {
            return Err(Error::invalid("sample_rate_hz", alloc::format!("{rate} Hz not allowed for {}", self.channel_kind)));
        }
        if !(2..=24).contains(&self.resolution_bits) {
            return Err(Error::invalid("resolution_bits", "must lie in 2..=24"));
        }
        if !(self.full_scale > 0.0) {
            return Err(Error::invalid("full_scale", "must be positive"));
        }
        Ok(())
    }

    pub fn code_max(&self) -> i32 {
        (1i32 << (self.resolution_bits - 1)) - 1
    }

    pub fn code_min(&self) -> i32 {
        -(1i32 << (self.resolution_bits - 1))
    }

    /// Physical units per ADC code.
    pub fn lsb(&self) -> f64 {
        self.full_scale / self.code_max() as f64
    }

    /// Nearest code, saturating at the representable extremes.
    pub fn quantize(&self, value: f64) -> i32 {
        let code = libm::round(value / self.lsb());
        code.clamp(self.code_min() as f64, self.code_max() as f64) as i32
    }

    pub fn to_physical(&self, code: i32) -> f64 {
        code as f64 * self.lsb()
    }
}

/// One hub-timestamped batch of samples for a single channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePacket {
    pub channel_kind: ChannelKind,
    pub seq: u64,
    pub hub_timestamp_s: f64,
    /// ADC codes; empty when `loss_flag` is set.
    pub payload: Vec<i32>,
    pub loss_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStream {
    pub config: ChannelConfig,
    pub packets: Vec<SamplePacket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Assisted,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::Assisted => "assisted",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Condition::Baseline),
            "assisted" => Ok(Condition::Assisted),
            other => Err(Error::invalid("condition", alloc::format!("unknown condition `{other}`"))),
        }
    }
}

/// One subject × task × condition (× trial) recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub subject_id: String,
    pub task: TaskSpec,
    pub condition: Condition,
    #[serde(default)]
    pub trial: u32,
    pub channels: BTreeMap<ChannelKind, ChannelStream>,
    /// Pre-session electrode impedance check (simulated).
    #[serde(default = "yes")]
    pub impedance_ok: bool,
    #[serde(default)]
    pub qc: Option<QcSummary>,
    #[serde(default)]
    pub outcomes: Option<SessionOutcomes>,
}

fn yes() -> bool {
    true
}

impl SessionRecord {
    /// Checks the channel set every session must carry: IMU acceleration, at
    /// least one EMG channel and the joint angle.
    pub fn check_required_channels(&self) -> Result<()> {
        for kind in [ChannelKind::ImuAccel, ChannelKind::JointAngle] {
            if !self.channels.contains_key(&kind) {
                return Err(Error::MissingChannel(kind));
            }
        }
        if !self.channels.keys().any(|k| k.is_emg()) {
            return Err(Error::MissingChannel(ChannelKind::EmgTriceps));
        }
        Ok(())
    }

    /// Primary EMG channel: triceps when present, otherwise EPB.
    pub fn primary_emg(&self) -> Option<ChannelKind> {
        [ChannelKind::EmgTriceps, ChannelKind::EmgEpb]
            .into_iter()
            .find(|k| self.channels.contains_key(k))
    }

    pub fn session_key(&self) -> String {
        alloc::format!(
            "{}_{}_{}_t{}",
            self.subject_id,
            self.task.task_kind.as_str(),
            self.condition.as_str(),
            self.trial
        )
    }

    pub fn duration_s(&self) -> f64 {
        self.task.duration_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_names_round_trip() {
        for k in ChannelKind::ALL {
            assert_eq!(k.as_str().parse::<ChannelKind>().unwrap(), k);
        }
        assert_eq!(
            "emg_biceps".parse::<ChannelKind>(),
            Err(Error::UnknownChannel("emg_biceps".into()))
        );
    }

    #[test]
    fn quantization_saturates() {
        let c = ChannelConfig::default_for(ChannelKind::ForceFlex);
        assert_eq!(c.code_max(), 2047);
        assert_eq!(c.code_min(), -2048);
        assert_eq!(c.quantize(1e9), 2047);
        assert_eq!(c.quantize(-1e9), -2048);
        assert!((c.to_physical(c.quantize(1.0)) - 1.0).abs() <= c.lsb() / 2.0);
    }

    #[test]
    fn emg_rate_is_enforced() {
        let mut c = ChannelConfig::default_for(ChannelKind::EmgEpb);
        c.sample_rate_hz = 500.0;
        assert!(c.validate().is_err());
        for c in ChannelConfig::default_set() {
            c.validate().unwrap();
        }
    }
}
