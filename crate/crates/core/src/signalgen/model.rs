use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::rng::{derive, Stream};
use super::{SubjectProfile, TaskSpec};
use crate::dsp::{moving_median, savitzky_golay, savitzky_golay_coefficients, welch_psd};
use crate::metrics::{TiSettings, TI_BAND_HZ, TI_REFERENCE_BAND_HZ};
use crate::session::{ChannelConfig, ChannelKind, ChannelStream, Condition, SamplePacket, SessionRecord};
use crate::{Error, Result};

/// Source model behind every generated channel.
///
/// Acceleration is gravity plus an amplitude-modulated tremor sinusoid,
/// voluntary-motion tones outside 4–12 Hz and white sensor noise. Tremor
/// power is solved from the latent TI so that the band-power ratio after the
/// IMU smoothing chain lands on it. Tones must sit on whole-hertz bins away
/// from the band edges; the default single 2 Hz tone also passes the median
/// stage of the smoothing chain almost unchanged, which faster tones do not.
///
/// EMG is a single motor-unit action-potential train firing at 4 Hz: a
/// multitone on the 4 Hz grid of a 250 ms window, flat from 20 Hz up to a
/// moving raised-cosine edge, so the median frequency sits halfway between
/// 20 Hz and the edge and drifts at the latent slope. A burst envelope
/// follows the movement cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub tremor_hz_range: (f64, f64),
    pub am_depth: f64,
    pub am_hz_range: (f64, f64),
    pub broadband_tones_hz: Vec<f64>,
    /// Total broadband power after smoothing, (m/s²)².
    pub broadband_power: f64,
    pub accel_noise_var: f64,
    pub gravity: f64,
    pub emg_fmed_hz_range: (f64, f64),
    pub epb_fmed_offset_hz: f64,
    pub emg_rms_mv: (f64, f64),
    /// Width of the raised-cosine upper band edge.
    pub emg_edge_width_hz: f64,
    pub burst_floor: f64,
    pub hum_mv: f64,
    pub mains_hz: f64,
    pub angle_mid_deg: f64,
    pub angle_noise_deg: f64,
    pub gyro_noise_dps: f64,
    pub flex_noise_v: f64,
    pub perturbation_width_s: f64,
    pub packet_s: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        Self {
            tremor_hz_range: (6.0, 9.0),
            am_depth: 0.2,
            am_hz_range: (0.2, 0.4),
            broadband_tones_hz: alloc::vec![2.0],
            broadband_power: 0.02,
            accel_noise_var: 1e-4,
            gravity: 9.81,
            emg_fmed_hz_range: (95.0, 105.0),
            epb_fmed_offset_hz: 15.0,
            emg_rms_mv: (0.25, 0.15),
            emg_edge_width_hz: 40.0,
            burst_floor: 0.4,
            hum_mv: 0.005,
            mains_hz: 50.0,
            angle_mid_deg: 80.0,
            angle_noise_deg: 0.02,
            gyro_noise_dps: 0.5,
            flex_noise_v: 0.002,
            perturbation_width_s: 0.15,
            packet_s: 0.05,
        }
    }
}

impl SignalModel {
    /// Tremor only: no broadband motion, no sensor noise, no modulation.
    pub fn pure_tremor() -> Self {
        Self {
            am_depth: 0.0,
            broadband_power: 0.0,
            accel_noise_var: 0.0,
            ..Self::default()
        }
    }
}

/// Magnitude response of the centered Savitzky–Golay smoother at `f_hz`.
pub fn smoothing_gain(f_hz: f64, rate_hz: f64, settings: &TiSettings) -> f64 {
    let c = savitzky_golay_coefficients(settings.sg_len, settings.sg_order, 0).unwrap_or_default();
    let half = (c.len() / 2) as f64;
    let w = 2.0 * PI * f_hz / rate_hz;
    libm::fabs(c.iter().enumerate().map(|(k, ck)| ck * libm::cos(w * (k as f64 - half))).sum::<f64>())
}

/// White noise power inside a band after smoothing.
fn smoothed_noise_power(var: f64, band: (f64, f64), rate_hz: f64, settings: &TiSettings) -> f64 {
    if var == 0.0 {
        return 0.0;
    }
    let steps = 400;
    let df = (band.1 - band.0) / steps as f64;
    let density = 2.0 * var / rate_hz;
    (0..steps)
        .map(|i| {
            let f = band.0 + (i as f64 + 0.5) * df;
            let g = smoothing_gain(f, rate_hz, settings);
            density * g * g * df
        })
        .sum()
}

/// The median stage of the IMU smoothing chain is nonlinear and trims the
/// faster broadband tones more than the tremor, so the linear solution is
/// refined on the actual chain. Each step rescales the tremor amplitude by
/// the square root of the ratio between the target and the measured
/// in-band odds, measured by Welch over the whole record.
fn calibrate_tremor(a0: f64, ti: f64, rate: f64, settings: &TiSettings, compose: &dyn Fn(f64) -> Vec<f64>) -> f64 {
    let seg = libm::floor(settings.segment_s * rate + 1e-9) as usize;
    let odds = |p: f64| p / (1.0 - p);
    let mut a = a0;
    for _ in 0..CALIBRATION_STEPS {
        let x = compose(a);
        let Ok(med) = moving_median(&x, settings.median_len) else { break };
        let Ok(smooth) = savitzky_golay(&med, settings.sg_len, settings.sg_order) else { break };
        let Ok(psd) = welch_psd(&smooth, rate, seg, settings.overlap_frac) else { break };
        let den = psd.band_power(TI_REFERENCE_BAND_HZ.0, TI_REFERENCE_BAND_HZ.1);
        let num = psd.band_power(TI_BAND_HZ.0, TI_BAND_HZ.1);
        if !(den > 0.0 && num > 0.0 && num < den) {
            break;
        }
        a *= libm::sqrt(odds(ti) / odds(num / den));
    }
    a
}

const CALIBRATION_STEPS: usize = 3;

const EMG_LOW_EDGE_HZ: f64 = 20.0;

/// Subject-level traits that do not depend on task or condition.
struct Traits {
    tremor_hz: f64,
    tremor_phase: f64,
    am_hz: f64,
    am_phase: f64,
    fmed0_hz: f64,
}

impl Traits {
    fn of(profile: &SubjectProfile, model: &SignalModel) -> Self {
        let mut s = Stream::new(derive(&[profile.rng_seed, 0x7261_6974]));
        Self {
            tremor_hz: s.range(model.tremor_hz_range.0, model.tremor_hz_range.1),
            tremor_phase: s.range(0.0, 2.0 * PI),
            am_hz: s.range(model.am_hz_range.0, model.am_hz_range.1),
            am_phase: s.range(0.0, 2.0 * PI),
            fmed0_hz: s.range(model.emg_fmed_hz_range.0, model.emg_fmed_hz_range.1),
        }
    }
}

struct Kinematics {
    rom: f64,
    cycle_hz: f64,
    mid: f64,
}

impl Kinematics {
    fn angle(&self, t: f64) -> f64 {
        if self.cycle_hz == 0.0 {
            return self.mid;
        }
        self.mid - 0.5 * self.rom * libm::cos(2.0 * PI * self.cycle_hz * t)
    }

    fn velocity(&self, t: f64) -> f64 {
        if self.cycle_hz == 0.0 {
            return 0.0;
        }
        0.5 * self.rom * 2.0 * PI * self.cycle_hz * libm::sin(2.0 * PI * self.cycle_hz * t)
    }

    /// Muscle activity envelope, peaking mid-extension of each cycle.
    fn envelope(&self, t: f64, floor: f64) -> f64 {
        if self.cycle_hz == 0.0 {
            return 1.0;
        }
        floor + (1.0 - floor) * 0.5 * (1.0 - libm::cos(2.0 * PI * self.cycle_hz * t))
    }
}

fn bump(task: &TaskSpec, t: f64, width: f64) -> f64 {
    task.perturbation_schedule
        .iter()
        .filter(|p| t >= p.time_s && t < p.time_s + width)
        .map(|p| p.magnitude * libm::sin(PI * (t - p.time_s) / width))
        .sum()
}

fn channel_index(kind: ChannelKind) -> u64 {
    kind as u64 + 1
}

struct Ctx<'a> {
    task: &'a TaskSpec,
    model: &'a SignalModel,
    traits: Traits,
    kin: Kinematics,
    ti: f64,
    fatigue_slope: f64,
    seed: u64,
    trial: u32,
}

impl Ctx<'_> {
    fn session_seed(&self, tag: u64) -> u64 {
        derive(&[self.seed, self.task.task_kind.index(), self.trial as u64, tag])
    }

    fn accel(&self, rate: f64, n: usize) -> Vec<f64> {
        let m = self.model;
        let settings = TiSettings::default();
        let mut phases = Stream::new(self.session_seed(0x6262));
        let tones: Vec<(f64, f64, f64)> = m
            .broadband_tones_hz
            .iter()
            .map(|&f| {
                let p = m.broadband_power / m.broadband_tones_hz.len() as f64;
                let g = smoothing_gain(f, rate, &settings);
                (f, libm::sqrt(2.0 * p) / g, phases.range(0.0, 2.0 * PI))
            })
            .collect();
        let n_ref = smoothed_noise_power(m.accel_noise_var, TI_REFERENCE_BAND_HZ, rate, &settings);
        let n_in = smoothed_noise_power(m.accel_noise_var, TI_BAND_HZ, rate, &settings);
        let other = m.broadband_power + n_ref;
        let tremor_power = if other == 0.0 && n_in == 0.0 {
            1.0
        } else {
            ((self.ti * other - n_in) / (1.0 - self.ti)).max(0.0)
        };
        let d = m.am_depth;
        let a0 = libm::sqrt(2.0 * tremor_power / (1.0 + 0.5 * d * d)) / smoothing_gain(self.traits.tremor_hz, rate, &settings);
        let sigma = libm::sqrt(m.accel_noise_var);
        let mut noise = Stream::new(self.session_seed(channel_index(ChannelKind::ImuAccel)));
        let tr = &self.traits;
        let mut tremor = Vec::with_capacity(n);
        let mut rest = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / rate;
            let am = 1.0 + d * libm::sin(2.0 * PI * tr.am_hz * t + tr.am_phase);
            tremor.push(am * libm::sin(2.0 * PI * tr.tremor_hz * t + tr.tremor_phase));
            let mut x = m.gravity;
            for &(f, a, ph) in &tones {
                x += a * libm::sin(2.0 * PI * f * t + ph);
            }
            if sigma > 0.0 {
                x += sigma * noise.normal();
            }
            rest.push(x + bump(self.task, t, m.perturbation_width_s));
        }
        let compose = |a: f64| -> Vec<f64> { tremor.iter().zip(&rest).map(|(u, r)| a * u + r).collect() };
        let a = if other > 0.0 { calibrate_tremor(a0, self.ti, rate, &settings, &compose) } else { a0 };
        compose(a)
    }

    fn emg(&self, kind: ChannelKind, rate: f64, n: usize) -> Vec<f64> {
        let m = self.model;
        let (fmed0, rms) = match kind {
            ChannelKind::EmgEpb => (self.traits.fmed0_hz + m.epb_fmed_offset_hz, m.emg_rms_mv.1),
            _ => (self.traits.fmed0_hz, m.emg_rms_mv.0),
        };
        // Tones sit on the k·rate/period grid, so one period of sin/cos serves
        // every tone.
        let period = libm::floor(0.25 * rate + 1e-9) as usize;
        let spacing = rate / period as f64;
        let sin_t: Vec<f64> = (0..period).map(|j| libm::sin(2.0 * PI * j as f64 / period as f64)).collect();
        let cos_t: Vec<f64> = (0..period).map(|j| libm::cos(2.0 * PI * j as f64 / period as f64)).collect();
        let k_lo = libm::ceil(EMG_LOW_EDGE_HZ / spacing - 1e-9) as usize;
        let width = m.emg_edge_width_hz;
        // A raised-cosine amplitude edge of width W holds as much power as a
        // hard edge W/8 below its center.
        let centre = |t: f64| 2.0 * (fmed0 + self.fatigue_slope * t / 60.0) - EMG_LOW_EDGE_HZ + width / 8.0;
        let duration = n as f64 / rate;
        let top = centre(0.0).max(centre(duration)) + 0.5 * width;
        let k_hi = (libm::floor(top / spacing) as usize).min(period / 2 - 1);
        // Quarter-period phase steps between neighbours keep the Hann
        // cross-terms between adjacent bins out of the power spectrum.
        let phase0 = Stream::new(self.session_seed(0x6565 + channel_index(kind))).range(0.0, 2.0 * PI);
        let ph: Vec<(f64, f64)> = (0..=k_hi)
            .map(|k| {
                let p = phase0 + 0.5 * PI * k as f64;
                (libm::cos(p), libm::sin(p))
            })
            .collect();
        let mut amp = alloc::vec![0.0; k_hi + 1];
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let u = centre(t);
                let mut power = 0.0;
                for (k, a) in amp.iter_mut().enumerate().skip(k_lo) {
                    let x = (k as f64 * spacing - (u - 0.5 * width)) / width;
                    *a = if x <= 0.0 {
                        1.0
                    } else if x >= 1.0 {
                        0.0
                    } else {
                        0.5 * (1.0 + libm::cos(PI * x))
                    };
                    power += *a * *a;
                }
                let mut acc = 0.0;
                for k in k_lo..=k_hi {
                    if amp[k] == 0.0 {
                        continue;
                    }
                    let j = (k * i) % period;
                    let (cp, sp) = ph[k];
                    // sin(a + p) = sin a·cos p + cos a·sin p
                    acc += amp[k] * (sin_t[j] * cp + cos_t[j] * sp);
                }
                let scale = if power > 0.0 { rms * libm::sqrt(2.0 / power) } else { 0.0 };
                let env = self.kin.envelope(t, m.burst_floor);
                env * scale * acc + m.hum_mv * libm::sin(2.0 * PI * m.mains_hz * t)
            })
            .collect()
    }

    fn kinematic(&self, kind: ChannelKind, rate: f64, n: usize) -> Vec<f64> {
        let m = self.model;
        let mut noise = Stream::new(self.session_seed(channel_index(kind)));
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                match kind {
                    ChannelKind::JointAngle => self.kin.angle(t) + m.angle_noise_deg * noise.normal(),
                    ChannelKind::ImuGyro => self.kin.velocity(t) + m.gyro_noise_dps * noise.normal(),
                    _ => {
                        0.5 + 0.01 * self.kin.angle(t)
                            + m.flex_noise_v * noise.normal()
                            + 0.1 * bump(self.task, t, m.perturbation_width_s)
                    }
                }
            })
            .collect()
    }
}

fn packetize(config: &ChannelConfig, samples: &[f64], packet_s: f64) -> Vec<SamplePacket> {
    let rate = config.sample_rate_hz;
    let per = rate * packet_s;
    let mut out = Vec::new();
    let mut p = 0u64;
    loop {
        let lo = libm::floor(p as f64 * per + 1e-9) as usize;
        if lo >= samples.len() {
            break;
        }
        let hi = (libm::floor((p + 1) as f64 * per + 1e-9) as usize).min(samples.len());
        out.push(SamplePacket {
            channel_kind: config.channel_kind,
            seq: p,
            hub_timestamp_s: lo as f64 / rate,
            payload: samples[lo..hi].iter().map(|&x| config.quantize(x)).collect(),
            loss_flag: false,
        });
        p += 1;
    }
    out
}

/// [`generate_session_with`] using the default model, trial 0.
pub fn generate_session(
    profile: &SubjectProfile,
    task: &TaskSpec,
    condition: Condition,
    channels: &[ChannelConfig],
) -> Result<SessionRecord> {
    generate_session_with(profile, task, condition, channels, &SignalModel::default(), 0)
}

/// Generates one recording. Noise and phases depend on the subject seed,
/// task and trial but not on the condition, so paired sessions differ only
/// through the latent values.
pub fn generate_session_with(
    profile: &SubjectProfile,
    task: &TaskSpec,
    condition: Condition,
    channels: &[ChannelConfig],
    model: &SignalModel,
    trial: u32,
) -> Result<SessionRecord> {
    task.validate()?;
    profile.validate()?;
    for c in channels {
        c.validate()?;
    }
    let has = |k: ChannelKind| channels.iter().any(|c| c.channel_kind == k);
    for k in [ChannelKind::ImuAccel, ChannelKind::JointAngle] {
        if !has(k) {
            return Err(Error::MissingChannel(k));
        }
    }
    if !channels.iter().any(|c| c.channel_kind.is_emg()) {
        return Err(Error::MissingChannel(ChannelKind::EmgTriceps));
    }
    if !(model.packet_s > 0.0) {
        return Err(Error::invalid("packet_s", "must be positive"));
    }

    let cycle_hz = if task.is_isometric() { 0.0 } else { profile.reps(condition) / 60.0 };
    let ctx = Ctx {
        task,
        model,
        traits: Traits::of(profile, model),
        kin: Kinematics {
            rom: profile.rom(condition),
            cycle_hz,
            mid: model.angle_mid_deg,
        },
        ti: profile.ti(condition),
        fatigue_slope: profile.fatigue_slope(condition),
        seed: profile.rng_seed,
        trial,
    };

    let mut streams = BTreeMap::new();
    for config in channels {
        if streams.contains_key(&config.channel_kind) {
            return Err(Error::invalid("channels", alloc::format!("{} listed twice", config.channel_kind)));
        }
        let rate = config.sample_rate_hz;
        let n = libm::floor(task.duration_s * rate + 1e-9) as usize;
        let samples = match config.channel_kind {
            ChannelKind::ImuAccel => ctx.accel(rate, n),
            k @ (ChannelKind::EmgTriceps | ChannelKind::EmgEpb) => ctx.emg(k, rate, n),
            k => ctx.kinematic(k, rate, n),
        };
        streams.insert(
            config.channel_kind,
            ChannelStream {
                config: *config,
                packets: packetize(config, &samples, model.packet_s),
            },
        );
    }

    Ok(SessionRecord {
        subject_id: profile.subject_id.clone(),
        task: task.clone(),
        condition,
        trial,
        channels: streams,
        impedance_ok: true,
        qc: None,
        outcomes: None,
    })
}
