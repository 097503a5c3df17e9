//! Subject-level paired analysis of session outcomes.
//!
//! Sessions are reduced to one value per subject and condition (the median
//! over tasks and trials), paired, and summarized by the median delta with a
//! BCa interval, an exact Wilcoxon p-value and a sign-based Cliff's δ.

mod bootstrap;
mod effect;
mod report;
mod responders;
mod sensitivity;
mod wilcoxon;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::session::Condition;
use crate::signalgen::TaskKind;
use crate::{num, Error, Result};

pub use bootstrap::{bca_ci, BootstrapCi, DEFAULT_RESAMPLES, MIN_RESAMPLES};
pub use effect::{cliffs_delta_signed, effect_label, trimmed_mean, TrimmedMean, LARGE_EFFECT_LABEL};
pub use report::{
    analyze_cohort, render_report, AnalysisSettings, ExcludedSession, OutcomeRow, Report, SensitivitySummary,
    TechEndpoints, MULTIPLICITY_NOTE,
};
pub use responders::{responder_table, ResponderRow, ResponderThresholds};
pub use sensitivity::{task_resample_sensitivity, SensitivityResult};
pub use wilcoxon::wilcoxon_exact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ti,
    Rom,
    Reps,
    FatigueSlope,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Ti, Outcome::Rom, Outcome::Reps, Outcome::FatigueSlope];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ti => "ti",
            Outcome::Rom => "rom",
            Outcome::Reps => "reps",
            Outcome::FatigueSlope => "fatigue_slope",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Ti => "Tremor Index",
            Outcome::Rom => "ROM (deg)",
            Outcome::Reps => "Reps/min",
            Outcome::FatigueSlope => "f_med slope (Hz/min)",
        }
    }

    pub fn value(self, v: &OutcomeValues) -> f64 {
        match self {
            Outcome::Ti => v.ti,
            Outcome::Rom => v.rom_deg,
            Outcome::Reps => v.reps_per_min,
            Outcome::FatigueSlope => v.fmed_slope_hz_per_min,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::invalid("outcome", alloc::format!("unknown outcome `{s}`")))
    }
}

/// One row of the per-session summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummaryRow {
    pub subject_id: String,
    pub task: TaskKind,
    pub condition: Condition,
    pub ti_median: f64,
    pub rom_deg: f64,
    pub reps_per_min: f64,
    pub fmed_slope_hz_per_min: f64,
    #[serde(default)]
    pub trial: u32,
    #[serde(default)]
    pub excluded: bool,
    #[serde(default)]
    pub exclusion_reason: Option<String>,
}

impl SessionSummaryRow {
    pub fn values(&self) -> OutcomeValues {
        OutcomeValues {
            ti: self.ti_median,
            rom_deg: self.rom_deg,
            reps_per_min: self.reps_per_min,
            fmed_slope_hz_per_min: self.fmed_slope_hz_per_min,
        }
    }

    pub fn session_key(&self) -> String {
        alloc::format!("{}_{}_{}_t{}", self.subject_id, self.task, self.condition, self.trial)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeValues {
    pub ti: f64,
    pub rom_deg: f64,
    pub reps_per_min: f64,
    pub fmed_slope_hz_per_min: f64,
}

impl OutcomeValues {
    /// Component-wise median.
    pub fn median_of(values: &[OutcomeValues]) -> Option<Self> {
        let col = |f: fn(&OutcomeValues) -> f64| num::median(&values.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            ti: col(|v| v.ti)?,
            rom_deg: col(|v| v.rom_deg)?,
            reps_per_min: col(|v| v.reps_per_min)?,
            fmed_slope_hz_per_min: col(|v| v.fmed_slope_hz_per_min)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectOutcomes {
    pub subject_id: String,
    pub baseline: OutcomeValues,
    pub assisted: OutcomeValues,
}

/// Reduces included sessions to one value per subject and condition.
/// Subjects lacking either condition are returned separately.
pub fn subject_level(rows: &[SessionSummaryRow]) -> (Vec<SubjectOutcomes>, Vec<String>) {
    let mut by: BTreeMap<&str, [Vec<OutcomeValues>; 2]> = BTreeMap::new();
    for r in rows {
        let slot = by.entry(r.subject_id.as_str()).or_default();
        if !r.excluded {
            slot[r.condition as usize].push(r.values());
        }
    }
    let mut paired = Vec::new();
    let mut unpaired = Vec::new();
    for (id, [b, a]) in by {
        match (OutcomeValues::median_of(&b), OutcomeValues::median_of(&a)) {
            (Some(baseline), Some(assisted)) => paired.push(SubjectOutcomes {
                subject_id: String::from(id),
                baseline,
                assisted,
            }),
            _ => unpaired.push(String::from(id)),
        }
    }
    (paired, unpaired)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub subject_id: String,
    pub baseline: f64,
    pub assisted: f64,
    /// `assisted − baseline`.
    pub delta: f64,
}

impl PairedSample {
    pub fn new(subject_id: impl Into<String>, baseline: f64, assisted: f64) -> Self {
        Self {
            subject_id: subject_id.into(),
            baseline,
            assisted,
            delta: assisted - baseline,
        }
    }
}

pub fn paired_samples(subjects: &[SubjectOutcomes], outcome: Outcome) -> Vec<PairedSample> {
    subjects
        .iter()
        .map(|s| PairedSample::new(s.subject_id.clone(), outcome.value(&s.baseline), outcome.value(&s.assisted)))
        .collect()
}

/// Median of within-subject deltas.
pub fn paired_median_delta(samples: &[PairedSample]) -> Result<f64> {
    let d: Vec<f64> = samples.iter().map(|s| s.delta).collect();
    num::median(&d).ok_or(Error::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedContrast {
    pub outcome_name: String,
    pub median_delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_exact: f64,
    pub cliffs_delta: f64,
    pub n: usize,
    pub b_resamples: usize,
}

impl PairedContrast {
    pub fn ci_contains_estimate(&self) -> bool {
        self.ci_low <= self.median_delta && self.median_delta <= self.ci_high
    }
}

/// Median delta, BCa interval for the median, exact Wilcoxon p and Cliff's δ.
pub fn paired_contrast(
    outcome_name: &str,
    deltas: &[f64],
    b_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<PairedContrast> {
    let median = |x: &[f64]| num::median(x).unwrap_or(f64::NAN);
    let ci = bca_ci(deltas, &median, b_resamples, confidence, seed)?;
    Ok(PairedContrast {
        outcome_name: String::from(outcome_name),
        median_delta: ci.estimate,
        ci_low: ci.low,
        ci_high: ci.high,
        p_exact: wilcoxon_exact(deltas),
        cliffs_delta: cliffs_delta_signed(deltas),
        n: deltas.len(),
        b_resamples,
    })
}

/// 20%-style trimmed mean of the paired deltas.
pub fn trimmed_mean_contrast(samples: &[PairedSample], trim_frac: f64) -> Result<TrimmedMean> {
    let d: Vec<f64> = samples.iter().map(|s| s.delta).collect();
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    trimmed_mean(&d, trim_frac).ok_or_else(|| Error::invalid("trim_frac", "must lie in [0, 0.5)"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(d: &[f64]) -> Vec<PairedSample> {
        d.iter().map(|&x| PairedSample::new("s", 1.0, 1.0 + x)).collect()
    }

    #[test]
    fn median_delta_examples() {
        assert_eq!(paired_median_delta(&[PairedSample::new("a", 1.0, 0.0), PairedSample::new("b", 0.0, 0.0), PairedSample::new("c", 0.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(paired_median_delta(&[PairedSample::new("a", 0.0, 1.0), PairedSample::new("b", 0.0, 3.0)]).unwrap(), 2.0);
        assert_eq!(paired_median_delta(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn delta_is_exact_difference() {
        let s = PairedSample::new("x", 0.447, 0.364);
        assert_eq!(s.delta, 0.364 - 0.447);
    }

    #[test]
    fn subject_level_uses_median_and_drops_unpaired() {
        let row = |id: &str, c: Condition, ti: f64, excluded: bool| SessionSummaryRow {
            subject_id: id.into(),
            task: TaskKind::PushExtend,
            condition: c,
            ti_median: ti,
            rom_deg: 80.0,
            reps_per_min: 10.0,
            fmed_slope_hz_per_min: -0.4,
            trial: 0,
            excluded,
            exclusion_reason: None,
        };
        let rows = [
            row("A", Condition::Baseline, 0.4, false),
            row("A", Condition::Baseline, 0.5, false),
            row("A", Condition::Assisted, 0.3, false),
            row("B", Condition::Baseline, 0.4, false),
            row("B", Condition::Assisted, 0.3, true),
        ];
        let (p, u) = subject_level(&rows);
        assert_eq!(p.len(), 1);
        assert!((p[0].baseline.ti - 0.45).abs() < 1e-15);
        assert_eq!(u, ["B"]);
    }

    #[test]
    fn contrast_fields() {
        let c = paired_contrast("ti", &[-0.1, -0.08, -0.09, -0.12, 0.01, -0.07], 2000, 0.95, 5).unwrap();
        assert_eq!(c.n, 6);
        assert!((c.cliffs_delta - (-4.0 / 6.0)).abs() < 1e-12);
        assert!(c.ci_contains_estimate());
        let t = trimmed_mean_contrast(&samples(&[-100.0, 1.0, 2.0, 3.0, 100.0]), 0.2).unwrap();
        assert_eq!(t.value, 2.0);
    }
}
