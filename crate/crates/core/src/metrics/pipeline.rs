use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fatigue::{emg_chain, FMED_BAND_HZ};
use super::tremor::TiSettings;
use crate::dsp::{
    emg_features_auto, median_frequency, welch_psd, MovingMedian, SavitzkyGolay, StreamFilter, Window, WindowFeatures,
    WINDOW_HOP_S, WINDOW_LEN_S,
};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamingFeaturesConfig {
    pub emg_rate_hz: f64,
    pub accel_rate_hz: f64,
    pub mains_hz: f64,
    pub ti: TiSettings,
}

impl Default for StreamingFeaturesConfig {
    fn default() -> Self {
        Self {
            emg_rate_hz: 1000.0,
            accel_rate_hz: 200.0,
            mains_hz: 50.0,
            ti: TiSettings::default(),
        }
    }
}

/// Fixed-capacity history that can be read back oldest-first.
#[derive(Debug, Clone)]
struct Ring {
    buf: Vec<f64>,
    head: usize,
    filled: usize,
}

impl Ring {
    fn new(n: usize) -> Self {
        Self {
            buf: vec![0.0; n.max(1)],
            head: 0,
            filled: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.buf[self.head] = x;
        self.head = (self.head + 1) % self.buf.len();
        self.filled = (self.filled + 1).min(self.buf.len());
    }

    fn full(&self) -> bool {
        self.filled == self.buf.len()
    }

    fn copy_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.buf[self.head..]);
        out.extend_from_slice(&self.buf[..self.head]);
    }
}

/// Sample-by-sample feature extraction for the live loop. EMG windows of
/// 250 ms are scored every 125 ms; TI is refreshed on the same cadence from
/// the rolling acceleration buffer and attached to the next EMG window.
#[derive(Debug, Clone)]
pub struct StreamingFeatures {
    cfg: StreamingFeaturesConfig,
    emg_filters: [StreamFilter; 2],
    emg: Ring,
    emg_seen: u64,
    emg_hop: u64,
    accel_median: MovingMedian,
    accel_sg: SavitzkyGolay,
    accel: Ring,
    accel_seen: u64,
    accel_hop: u64,
    latest_ti: Option<f64>,
    latest: Option<WindowFeatures>,
    scratch: Vec<f64>,
}

impl StreamingFeatures {
    pub fn new(cfg: StreamingFeaturesConfig) -> Result<Self> {
        let n = |s: f64, r: f64| libm::floor(s * r + 1e-9) as usize;
        let (buffer, hop, _) = cfg.ti.lengths(cfg.accel_rate_hz);
        Ok(Self {
            emg_filters: emg_chain(cfg.emg_rate_hz, cfg.mains_hz)?,
            emg: Ring::new(n(WINDOW_LEN_S, cfg.emg_rate_hz)),
            emg_seen: 0,
            emg_hop: n(WINDOW_HOP_S, cfg.emg_rate_hz).max(1) as u64,
            accel_median: MovingMedian::new(cfg.ti.median_len)?,
            accel_sg: SavitzkyGolay::new(cfg.ti.sg_len, cfg.ti.sg_order)?,
            accel: Ring::new(buffer),
            accel_seen: 0,
            accel_hop: hop.max(1) as u64,
            latest_ti: None,
            latest: None,
            scratch: Vec::with_capacity(buffer.max(256)),
            cfg,
        })
    }

    pub fn latest(&self) -> Option<&WindowFeatures> {
        self.latest.as_ref()
    }

    pub fn latest_ti(&self) -> Option<f64> {
        self.latest_ti
    }

    /// Feeds one raw acceleration sample.
    pub fn push_accel(&mut self, x: f64) {
        let y = self.accel_sg.process(self.accel_median.process(x));
        self.accel.push(y);
        self.accel_seen += 1;
        if self.accel.full() && self.accel_seen % self.accel_hop == 0 {
            self.accel.copy_into(&mut self.scratch);
            if let Ok(ti) = self.cfg.ti.ti_of_buffer(&self.scratch, self.cfg.accel_rate_hz) {
                self.latest_ti = Some(ti);
            }
        }
    }

    /// Feeds one raw EMG sample; returns the new feature vector when a
    /// window completes.
    pub fn push_emg(&mut self, x: f64) -> Option<WindowFeatures> {
        let y = self.emg_filters.iter_mut().fold(x, |acc, f| f.process(acc));
        self.emg.push(y);
        self.emg_seen += 1;
        if !(self.emg.full() && self.emg_seen % self.emg_hop == 0) {
            return None;
        }
        self.emg.copy_into(&mut self.scratch);
        let rate = self.cfg.emg_rate_hz;
        let start = (self.emg_seen - self.scratch.len() as u64) as f64 / rate;
        let window = Window {
            start_time_s: start,
            samples: &self.scratch,
            sample_rate_hz: rate,
        };
        let amp = emg_features_auto(&window).ok()?;
        let fmed = welch_psd(&self.scratch, rate, self.scratch.len(), 0.0)
            .and_then(|psd| median_frequency(&psd, FMED_BAND_HZ))
            .unwrap_or(0.0);
        let f = WindowFeatures {
            rms: amp.rms,
            mav: amp.mav,
            zc_count: amp.zc_count,
            median_freq_hz: fmed,
            ti: self.latest_ti.unwrap_or(0.0),
            window_start_s: start,
        };
        self.latest = Some(f);
        Some(f)
    }
}
