//! Synthetic multimodal recordings with known latent outcomes, and cohorts of
//! subjects calibrated to target medians and IQRs.

mod cohort;
mod missing;
mod model;
pub(crate) mod rng;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::session::Condition;
use crate::{Error, Result};

pub use cohort::{generate_cohort, CohortCalibration, Spread};
pub use missing::{inject_missingness, inject_missingness_on, MissingPattern};
pub use rng::derive as derive_seed;
pub use model::{generate_session, generate_session_with, smoothing_gain, SignalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PushExtend,
    PinchGrip,
    ReachHold,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::PushExtend, TaskKind::PinchGrip, TaskKind::ReachHold];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PushExtend => "push_extend",
            TaskKind::PinchGrip => "pinch_grip",
            TaskKind::ReachHold => "reach_hold",
        }
    }

    pub(crate) fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("task_kind", alloc::format!("unknown task `{s}`")))
    }
}

/// A transient load applied at `time_s`; `magnitude` in m/s² at the IMU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub time_s: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_kind: TaskKind,
    pub duration_s: f64,
    /// Pacing target. Zero makes the task isometric; otherwise cycles run at
    /// the subject's own pace.
    pub cycle_rate_hz: f64,
    #[serde(default)]
    pub perturbation_schedule: Vec<Perturbation>,
}

impl TaskSpec {
    /// Standard 120 s task paced at 10 cycles/min. Reach-and-hold adds a
    /// perturbation every 20 s.
    pub fn standard(task_kind: TaskKind) -> Self {
        let perturbation_schedule = match task_kind {
            TaskKind::ReachHold => (1..6)
                .map(|k| Perturbation {
                    time_s: 20.0 * k as f64 + 3.0,
                    magnitude: 0.5,
                })
                .collect(),
            _ => Vec::new(),
        };
        Self {
            task_kind,
            duration_s: 120.0,
            cycle_rate_hz: 10.0 / 60.0,
            perturbation_schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(60.0..=180.0).contains(&self.duration_s) {
            return Err(Error::DurationOutOfRange(self.duration_s));
        }
        if !(self.cycle_rate_hz >= 0.0 && self.cycle_rate_hz.is_finite()) {
            return Err(Error::invalid("cycle_rate_hz", "must be finite and nonnegative"));
        }
        if self.perturbation_schedule.iter().any(|p| !(p.time_s.is_finite() && p.magnitude.is_finite())) {
            return Err(Error::invalid("perturbation_schedule", "entries must be finite"));
        }
        Ok(())
    }

    pub fn is_isometric(&self) -> bool {
        self.cycle_rate_hz == 0.0
    }
}

/// A value that differs by condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerCondition<T> {
    pub baseline: T,
    pub assisted: T,
}

impl<T: Copy> PerCondition<T> {
    pub fn get(&self, c: Condition) -> T {
        match c {
            Condition::Baseline => self.baseline,
            Condition::Assisted => self.assisted,
        }
    }
}

/// Latent per-subject outcome values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub baseline_ti: f64,
    pub ti_delta: f64,
    pub baseline_rom_deg: f64,
    pub rom_gain_frac: f64,
    pub baseline_reps_per_min: f64,
    pub reps_delta: f64,
    pub fatigue_slope_hz_per_min: PerCondition<f64>,
    pub rng_seed: u64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        let ti_a = self.baseline_ti + self.ti_delta;
        if !(self.baseline_ti > 0.0 && self.baseline_ti < 1.0) {
            return Err(Error::invalid("baseline_ti", "must lie in (0, 1)"));
        }
        if !(ti_a > 0.0 && ti_a < 1.0) {
            return Err(Error::invalid("ti_delta", "assisted TI must lie in (0, 1)"));
        }
        if !(self.baseline_rom_deg > 0.0 && self.rom(Condition::Assisted) > 0.0) {
            return Err(Error::invalid("baseline_rom_deg", "ROM must be positive in both conditions"));
        }
        if !(self.baseline_reps_per_min > 0.0 && self.reps(Condition::Assisted) > 0.0) {
            return Err(Error::invalid("baseline_reps_per_min", "rate must be positive in both conditions"));
        }
        let s = self.fatigue_slope_hz_per_min;
        if !(s.baseline.is_finite() && s.assisted.is_finite()) {
            return Err(Error::invalid("fatigue_slope_hz_per_min", "must be finite"));
        }
        Ok(())
    }

    pub fn ti(&self, c: Condition) -> f64 {
        match c {
            Condition::Baseline => self.baseline_ti,
            Condition::Assisted => self.baseline_ti + self.ti_delta,
        }
    }

    pub fn rom(&self, c: Condition) -> f64 {
        match c {
            Condition::Baseline => self.baseline_rom_deg,
            Condition::Assisted => self.baseline_rom_deg * (1.0 + self.rom_gain_frac),
        }
    }

    pub fn reps(&self, c: Condition) -> f64 {
        match c {
            Condition::Baseline => self.baseline_reps_per_min,
            Condition::Assisted => self.baseline_reps_per_min + self.reps_delta,
        }
    }

    pub fn fatigue_slope(&self, c: Condition) -> f64 {
        self.fatigue_slope_hz_per_min.get(c)
    }
}
