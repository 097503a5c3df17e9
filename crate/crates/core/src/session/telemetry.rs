use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ChannelKind, MultichannelView};
use crate::assist::{AssistCommand, ClampFlag};
use crate::dsp::WindowFeatures;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    #[default]
    Idle,
    Running,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssistSnapshot {
    pub need_score: f64,
    pub commanded_torque: f64,
    pub assist_level: f64,
    pub engaged: bool,
}

impl AssistSnapshot {
    pub fn from_command(cmd: &AssistCommand, need_score: f64, assist_level: f64) -> Self {
        Self {
            need_score,
            commanded_torque: cmd.commanded_torque,
            assist_level,
            engaged: cmd.engaged,
        }
    }
}

/// One UI frame: the raw samples that arrived since the previous frame plus
/// the latest derived state. Gaps stay `None` in the snippets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub seq: u64,
    pub t_s: f64,
    pub snippets: BTreeMap<ChannelKind, Vec<Option<f64>>>,
    pub features: Option<WindowFeatures>,
    pub ti_badge: Option<f64>,
    pub assist: Option<AssistSnapshot>,
    pub safety_flags: Vec<ClampFlag>,
    pub session_state: SessionState,
}

/// Cuts a multichannel view into frames at a fixed UI rate and stamps each
/// with whatever derived state the caller holds for that instant.
#[derive(Debug, Clone)]
pub struct FrameBuilder {
    ui_rate_hz: f64,
    next_seq: u64,
    cursor: BTreeMap<ChannelKind, usize>,
    pub features: Option<WindowFeatures>,
    pub assist: Option<AssistSnapshot>,
    pub safety_flags: Vec<ClampFlag>,
    pub session_state: SessionState,
}

impl FrameBuilder {
    pub fn new(ui_rate_hz: f64) -> Result<Self> {
        if !(25.0..=50.0).contains(&ui_rate_hz) {
            return Err(Error::invalid("ui_rate_hz", "must lie in [25, 50] Hz"));
        }
        Ok(Self {
            ui_rate_hz,
            next_seq: 0,
            cursor: BTreeMap::new(),
            features: None,
            assist: None,
            safety_flags: Vec::new(),
            session_state: SessionState::Running,
        })
    }

    pub fn ui_rate_hz(&self) -> f64 {
        self.ui_rate_hz
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.ui_rate_hz
    }

    /// Number of whole frames in `duration_s`.
    pub fn frame_count(&self, duration_s: f64) -> u64 {
        libm::floor(duration_s * self.ui_rate_hz + 1e-9) as u64
    }

    /// Emits the next frame, taking every sample of `view` with a timestamp
    /// before the end of the frame interval.
    pub fn next_frame(&mut self, view: &MultichannelView) -> TelemetryFrame {
        let seq = self.next_seq;
        self.next_seq += 1;
        let t_end = (seq + 1) as f64 / self.ui_rate_hz;
        let mut snippets = BTreeMap::new();
        for (&kind, ch) in &view.channels {
            let from = self.cursor.get(&kind).copied().unwrap_or(0);
            let upto = libm::floor((t_end - ch.start_s) * ch.sample_rate_hz + 1e-9).max(0.0) as usize;
            let upto = upto.min(ch.values.len()).max(from);
            snippets.insert(kind, ch.values[from..upto].to_vec());
            self.cursor.insert(kind, upto);
        }
        TelemetryFrame {
            seq,
            t_s: seq as f64 / self.ui_rate_hz,
            snippets,
            features: self.features,
            ti_badge: self.features.map(|f| f.ti),
            assist: self.assist,
            safety_flags: self.safety_flags.clone(),
            session_state: self.session_state,
        }
    }

    /// Skips frame numbers without emitting them, leaving a visible gap in
    /// `seq` for the consumer.
    pub fn skip(&mut self, frames: u64) {
        self.next_seq += frames;
    }
}

/// Frames for a whole recorded view at `ui_rate_hz` (25–50 Hz):
/// ⌊duration·rate⌋ frames with consecutive sequence numbers from 0.
pub fn packetize_for_ui(view: &MultichannelView, ui_rate_hz: f64) -> Result<Vec<TelemetryFrame>> {
    let mut builder = FrameBuilder::new(ui_rate_hz)?;
    let n = builder.frame_count(view.duration_s());
    Ok((0..n).map(|_| builder.next_frame(view)).collect())
}
