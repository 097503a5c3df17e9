use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tremorlab_core::assist::{NeedScoreModel, PdGains, SafetyEnvelope};
use tremorlab_core::session::{ChannelKind, Condition, DEFAULT_MAD_THRESHOLD};
use tremorlab_core::signalgen::{CohortCalibration, MissingPattern, TaskKind};

use crate::error::{CliError, CliResult};

/// Everything a run depends on. Persisted next to the outputs so a run can
/// be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cohort_size: usize,
    pub seed: u64,
    pub tasks: Vec<TaskKind>,
    pub trials_per_task: u32,
    pub task_duration_s: f64,
    pub condition_order: Vec<Condition>,
    /// Per-subject random condition order, derived from the seed.
    pub randomize_condition_order: bool,
    pub output_root: PathBuf,
    pub mad_threshold: f64,
    pub assist: AssistConfig,
    pub envelope: SafetyEnvelope,
    pub serve: ServeConfig,
    pub calibration: CohortCalibration,
    /// Packet loss injected into selected sessions after generation.
    pub missingness: Vec<MissingnessInjection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cohort_size: 12,
            seed: 20250,
            tasks: TaskKind::ALL.to_vec(),
            trials_per_task: 1,
            task_duration_s: 120.0,
            condition_order: vec![Condition::Baseline, Condition::Assisted],
            randomize_condition_order: false,
            output_root: PathBuf::from("tremorlab-out"),
            mad_threshold: DEFAULT_MAD_THRESHOLD,
            assist: AssistConfig::default(),
            envelope: SafetyEnvelope::default(),
            serve: ServeConfig::default(),
            calibration: CohortCalibration::default(),
            missingness: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistConfig {
    /// Replay each assisted session through the 100 Hz loop when simulating.
    pub replay_loop: bool,
    pub level: f64,
    pub gains: PdGains,
    pub need_model: NeedScoreModel,
    pub lookahead_s: f64,
}

impl Default for AssistConfig {
    fn default() -> Self {
        Self {
            replay_loop: true,
            level: 1.0,
            gains: PdGains::default(),
            need_model: NeedScoreModel::reference(),
            lookahead_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub ui_rate_hz: f64,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Per-client telemetry queue; the oldest messages go first on overflow.
    pub client_queue: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8787,
            ui_rate_hz: 25.0,
            time_scale: 1.0,
            client_queue: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessInjection {
    pub subject_id: String,
    pub task: TaskKind,
    pub condition: Condition,
    /// All channels when absent.
    #[serde(default)]
    pub channel: Option<ChannelKind>,
    pub fraction: f64,
    #[serde(default = "burst")]
    pub pattern: MissingPattern,
}

fn burst() -> MissingPattern {
    MissingPattern::Burst
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Validation(m.to_string()));
        if self.cohort_size == 0 {
            return bad("cohort_size must be at least 1");
        }
        if self.tasks.is_empty() {
            return bad("tasks must name at least one task");
        }
        let mut tasks = self.tasks.clone();
        tasks.sort();
        tasks.dedup();
        if tasks.len() != self.tasks.len() {
            return bad("tasks must not repeat");
        }
        if self.trials_per_task == 0 {
            return bad("trials_per_task must be at least 1");
        }
        if !(60.0..=180.0).contains(&self.task_duration_s) {
            return bad("task_duration_s must lie in [60, 180]");
        }
        let mut order = self.condition_order.clone();
        order.sort();
        if order != [Condition::Baseline, Condition::Assisted] {
            return bad("condition_order must list baseline and assisted once each");
        }
        if !(self.mad_threshold > 0.0) {
            return bad("mad_threshold must be positive");
        }
        if !(0.0..=1.0).contains(&self.assist.level) {
            return bad("assist.level must lie in [0, 1]");
        }
        if !(self.assist.lookahead_s >= 0.0 && self.assist.lookahead_s < 5.0) {
            return bad("assist.lookahead_s must lie in [0, 5)");
        }
        if !(25.0..=50.0).contains(&self.serve.ui_rate_hz) {
            return bad("serve.ui_rate_hz must lie in [25, 50]");
        }
        if !(self.serve.time_scale > 0.0 && self.serve.time_scale <= 100.0) {
            return bad("serve.time_scale must lie in (0, 100]");
        }
        if self.serve.client_queue == 0 {
            return bad("serve.client_queue must be at least 1");
        }
        for m in &self.missingness {
            if !(0.0..1.0).contains(&m.fraction) {
                return bad("missingness fraction must lie in [0, 1)");
            }
        }
        self.envelope.validate().map_err(CliError::from)?;
        self.calibration.validate().map_err(CliError::from)?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    /// Condition order for one subject.
    pub fn order_for(&self, subject_index: usize) -> Vec<Condition> {
        let mut order = self.condition_order.clone();
        if self.randomize_condition_order
            && tremorlab_core::signalgen::derive_seed(&[self.seed, subject_index as u64, 0x6f72_6465_72]) & 1 == 1
        {
            order.reverse();
        }
        order
    }
}
