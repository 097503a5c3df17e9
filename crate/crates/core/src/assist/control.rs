use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::envelope::{apply_envelope, AssistCommand, Measurement, SafetyEnvelope, SafetyState};
use super::{pd_reference, NeedModel, PdGains};
use crate::dsp::WindowFeatures;
use crate::metrics::{StreamingFeatures, StreamingFeaturesConfig};
use crate::session::{ChannelKind, MultichannelView};
use crate::{num, Error, Result};

/// 100 Hz control loop.
pub const TICK_PERIOD_S: f64 = 0.01;

/// Time source for latency measurement and pacing.
pub trait TickClock {
    fn now_s(&mut self) -> f64;

    /// Blocks until `tick` is due. Returns false when the tick starts after
    /// its own deadline. The default free-runs.
    fn wait_for_tick(&mut self, _tick: u64, _period_s: f64) -> bool {
        true
    }
}

/// Read-only tap on the loop output. Implementations must return quickly;
/// the loop does not wait on them for its latency figure but does call them
/// inline.
pub trait TickObserver {
    fn on_tick(&mut self, command: &AssistCommand, features: Option<&WindowFeatures>, need_score: f64);
}

impl<F: FnMut(&AssistCommand, Option<&WindowFeatures>, f64)> TickObserver for F {
    fn on_tick(&mut self, command: &AssistCommand, features: Option<&WindowFeatures>, need_score: f64) {
        self(command, features, need_score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct NullObserver;

impl TickObserver for NullObserver {
    fn on_tick(&mut self, _: &AssistCommand, _: Option<&WindowFeatures>, _: f64) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopStats {
    pub tick_period_s: f64,
    pub ticks: u64,
    pub per_tick_latency_s: Vec<f64>,
    pub missed_deadlines: u64,
    pub underruns: u64,
    pub median_latency_s: f64,
    pub p95_latency_s: f64,
}

impl LoopStats {
    /// Fills the median and p95 from the per-tick latencies.
    pub fn finish(mut self) -> Self {
        let v = num::sorted(&self.per_tick_latency_s);
        if !v.is_empty() {
            self.median_latency_s = num::median_of_sorted(&v);
            self.p95_latency_s = num::quantile_sorted(&v, 0.95);
        }
        self
    }
}

/// Samples feeding one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickInput<'a> {
    pub emg: &'a [Option<f64>],
    pub accel: &'a [Option<f64>],
    pub angle_deg: Option<f64>,
    pub velocity_dps: Option<f64>,
    pub reference_deg: Option<f64>,
    /// Replaces the shaped request for this tick. The envelope still applies.
    pub scripted_request: Option<f64>,
}

/// Recorded streams replayed through the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopInput {
    pub emg_rate_hz: f64,
    pub emg: Vec<Option<f64>>,
    pub imu_rate_hz: f64,
    pub accel: Vec<Option<f64>>,
    pub gyro: Vec<Option<f64>>,
    pub angle_rate_hz: f64,
    pub angle: Vec<Option<f64>>,
    /// The reference angle is the recorded angle this far ahead: the intended
    /// movement the assist follows.
    pub lookahead_s: f64,
}

impl LoopInput {
    pub fn from_view(view: &MultichannelView, lookahead_s: f64) -> Result<Self> {
        let emg = view
            .get(ChannelKind::EmgTriceps)
            .or_else(|| view.get(ChannelKind::EmgEpb))
            .ok_or(Error::MissingChannel(ChannelKind::EmgTriceps))?;
        let accel = view.get(ChannelKind::ImuAccel).ok_or(Error::MissingChannel(ChannelKind::ImuAccel))?;
        let angle = view.get(ChannelKind::JointAngle).ok_or(Error::MissingChannel(ChannelKind::JointAngle))?;
        let gyro = view.get(ChannelKind::ImuGyro).map(|g| g.values.clone()).unwrap_or_default();
        Ok(Self {
            emg_rate_hz: emg.sample_rate_hz,
            emg: emg.values.clone(),
            imu_rate_hz: accel.sample_rate_hz,
            accel: accel.values.clone(),
            gyro,
            angle_rate_hz: angle.sample_rate_hz,
            angle: angle.values.clone(),
            lookahead_s,
        })
    }

    fn span(len: usize, rate: f64, tick: u64) -> (usize, usize) {
        let lo = libm::floor(tick as f64 * TICK_PERIOD_S * rate + 1e-9) as usize;
        let hi = libm::floor((tick + 1) as f64 * TICK_PERIOD_S * rate + 1e-9) as usize;
        (lo.min(len), hi.min(len))
    }

    fn at(values: &[Option<f64>], rate: f64, t: f64) -> Option<f64> {
        let i = libm::floor(t * rate + 1e-9) as usize;
        values.get(i).copied().flatten()
    }

    pub fn tick(&self, tick: u64) -> TickInput<'_> {
        let (e0, e1) = Self::span(self.emg.len(), self.emg_rate_hz, tick);
        let (a0, a1) = Self::span(self.accel.len(), self.imu_rate_hz, tick);
        let t = tick as f64 * TICK_PERIOD_S;
        let angle_deg = Self::at(&self.angle, self.angle_rate_hz, t);
        let velocity_dps = if self.gyro.is_empty() {
            let prev = Self::at(&self.angle, self.angle_rate_hz, t - 1.0 / self.angle_rate_hz);
            match (angle_deg, prev) {
                (Some(a), Some(p)) if t > 0.0 => Some((a - p) * self.angle_rate_hz),
                (Some(_), _) => Some(0.0),
                _ => None,
            }
        } else {
            let g = &self.gyro[a0.min(self.gyro.len())..a1.min(self.gyro.len())];
            g.iter().rev().find_map(|v| *v)
        };
        TickInput {
            emg: &self.emg[e0..e1],
            accel: &self.accel[a0..a1],
            angle_deg,
            velocity_dps,
            reference_deg: Self::at(&self.angle, self.angle_rate_hz, t + self.lookahead_s).or(angle_deg),
            scripted_request: None,
        }
    }
}

/// Feature extraction, need score, PD shaping and the envelope for one
/// stream of ticks.
#[derive(Debug, Clone)]
pub struct AssistController<M> {
    pub model: M,
    pub envelope: SafetyEnvelope,
    pub gains: PdGains,
    /// Scales the shaped torque; 0 disables assistance.
    pub assist_level: f64,
    pub state: SafetyState,
    features: StreamingFeatures,
    last_meas: Measurement,
    last_raw: f64,
    need: f64,
}

impl<M: NeedModel> AssistController<M> {
    pub fn new(model: M, envelope: SafetyEnvelope, gains: PdGains, assist_level: f64, features: StreamingFeaturesConfig) -> Result<Self> {
        envelope.validate()?;
        if !(gains.kp >= 0.0 && gains.kd >= 0.0) {
            return Err(Error::invalid("gains", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&assist_level) {
            return Err(Error::invalid("assist_level", "must lie in [0, 1]"));
        }
        Ok(Self {
            model,
            envelope,
            gains,
            assist_level,
            state: SafetyState::default(),
            features: StreamingFeatures::new(features)?,
            last_meas: Measurement {
                angle_deg: 0.5 * (envelope.angle_min_deg + envelope.angle_max_deg),
                velocity_dps: 0.0,
            },
            last_raw: 0.0,
            need: 0.0,
        })
    }

    pub fn need_score(&self) -> f64 {
        self.need
    }

    pub fn latest_features(&self) -> Option<&WindowFeatures> {
        self.features.latest()
    }

    pub fn reset_safety(&mut self) {
        self.state.reset();
    }

    /// Runs one tick. Returns the command and whether the kinematic input
    /// was missing, in which case the previous request is held.
    pub fn step(&mut self, input: &TickInput<'_>) -> (AssistCommand, bool) {
        for x in input.accel.iter().flatten() {
            self.features.push_accel(*x);
        }
        for x in input.emg.iter().flatten() {
            self.features.push_emg(*x);
        }
        if let Some(f) = self.features.latest() {
            if let Ok(s) = self.model.score(f) {
                self.need = s;
            }
        }
        let (raw, meas, underrun) = match (input.angle_deg, input.velocity_dps) {
            (Some(angle_deg), Some(velocity_dps)) => {
                let span = self.envelope.angle_max_deg - self.envelope.angle_min_deg;
                let target = input.reference_deg.unwrap_or(angle_deg);
                let pd = pd_reference(target / span, angle_deg / span, velocity_dps / span, self.gains);
                let meas = Measurement { angle_deg, velocity_dps };
                let raw = input.scripted_request.unwrap_or(self.assist_level * self.need * pd);
                (raw, meas, false)
            }
            _ => (self.last_raw, self.last_meas, true),
        };
        self.last_raw = raw;
        self.last_meas = meas;
        (apply_envelope(&self.envelope, raw, &mut self.state, meas, TICK_PERIOD_S), underrun)
    }
}

/// Replays `input` through the controller for ⌊duration·100⌋ ticks.
///
/// Each tick's latency runs from the moment its input slice is ready to the
/// moment its command exists. A tick misses its deadline when it starts
/// late, takes longer than the period, or has no kinematic input.
pub fn run_loop<M: NeedModel>(
    input: &LoopInput,
    controller: &mut AssistController<M>,
    duration_s: f64,
    clock: &mut dyn TickClock,
    observer: Option<&mut dyn TickObserver>,
) -> (Vec<AssistCommand>, LoopStats) {
    let ticks = libm::floor(duration_s / TICK_PERIOD_S + 1e-9) as u64;
    let mut null = NullObserver;
    let observer: &mut dyn TickObserver = match observer {
        Some(o) => o,
        None => &mut null,
    };
    let mut commands = Vec::with_capacity(ticks as usize);
    let mut stats = LoopStats {
        tick_period_s: TICK_PERIOD_S,
        ticks,
        per_tick_latency_s: Vec::with_capacity(ticks as usize),
        missed_deadlines: 0,
        underruns: 0,
        median_latency_s: 0.0,
        p95_latency_s: 0.0,
    };
    for k in 0..ticks {
        let on_time = clock.wait_for_tick(k, TICK_PERIOD_S);
        let tick_input = input.tick(k);
        let t0 = clock.now_s();
        let (cmd, underrun) = controller.step(&tick_input);
        let latency = clock.now_s() - t0;
        stats.per_tick_latency_s.push(latency);
        if underrun {
            stats.underruns += 1;
        }
        if !on_time || underrun || latency > TICK_PERIOD_S {
            stats.missed_deadlines += 1;
        }
        observer.on_tick(&cmd, controller.latest_features(), controller.need_score());
        commands.push(cmd);
    }
    (commands, stats.finish())
}
