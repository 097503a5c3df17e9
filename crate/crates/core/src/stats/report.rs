use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{
    effect_label, paired_contrast, paired_samples, responder_table, subject_level, task_resample_sensitivity,
    trimmed_mean_contrast, Outcome, PairedContrast, ResponderRow, ResponderThresholds, SessionSummaryRow,
    TrimmedMean, DEFAULT_RESAMPLES,
};
use crate::num::{self, MedianIqr};
use crate::signalgen::rng::derive;
use crate::{Error, Result};

pub const MULTIPLICITY_NOTE: &str = "No multiplicity adjustment was applied.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub b_resamples: usize,
    pub seed: u64,
    pub trim: f64,
    pub confidence: f64,
    pub thresholds: ResponderThresholds,
    pub sensitivity_resamples: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            b_resamples: DEFAULT_RESAMPLES,
            seed: 0,
            trim: 0.20,
            confidence: 0.95,
            thresholds: ResponderThresholds::default(),
            sensitivity_resamples: 1000,
        }
    }
}

/// Loop and session endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechEndpoints {
    pub loop_rate_hz: f64,
    pub median_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub completion_pct: f64,
    pub adverse_events: u32,
    pub missed_deadlines: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSession {
    pub session_key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: Outcome,
    pub baseline: MedianIqr,
    pub assisted: MedianIqr,
    /// For ROM the deltas are percent of each subject's baseline.
    pub contrast: PairedContrast,
    pub effect_label: Option<String>,
    pub trimmed_mean: TrimmedMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub outcome: Outcome,
    pub point_delta: f64,
    pub q025: f64,
    pub q975: f64,
    pub sign_consistency: f64,
    pub n_subjects: usize,
    pub skipped_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_subjects: usize,
    pub subjects: Vec<String>,
    pub unpaired_subjects: Vec<String>,
    pub excluded_sessions: Vec<ExcludedSession>,
    pub outcomes: Vec<OutcomeRow>,
    pub rom_delta_deg: PairedContrast,
    /// Median ROM change in degrees over the cohort baseline median, in percent.
    pub rom_pct_of_cohort_median: f64,
    pub responders: Vec<ResponderRow>,
    pub technical: Option<TechEndpoints>,
    pub sensitivity: Vec<SensitivitySummary>,
    pub settings: AnalysisSettings,
    pub warnings: Vec<String>,
    pub footer: String,
}

impl Report {
    pub fn outcome(&self, o: Outcome) -> Option<&OutcomeRow> {
        self.outcomes.iter().find(|r| r.outcome == o)
    }
}

/// Runs the paired analysis on the per-session table.
///
/// Excluded sessions are dropped and listed. Each outcome uses its own
/// resampling stream derived from the seed, so adding or reordering outcomes
/// leaves the others unchanged.
pub fn analyze_cohort(rows: &[SessionSummaryRow], settings: &AnalysisSettings, technical: Option<TechEndpoints>) -> Result<Report> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let excluded_sessions: Vec<ExcludedSession> = rows
        .iter()
        .filter(|r| r.excluded)
        .map(|r| ExcludedSession {
            session_key: r.session_key(),
            reason: r.exclusion_reason.clone().unwrap_or_default(),
        })
        .collect();
    let (subjects, unpaired_subjects) = subject_level(rows);
    if subjects.len() < 3 {
        return Err(Error::InsufficientData(alloc::format!(
            "paired analysis needs at least 3 subjects with both conditions, found {}",
            subjects.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut outcomes = Vec::new();
    let mut rom_delta_deg = None;
    let mut rom_pct_of_cohort_median = 0.0;
    for (k, o) in Outcome::ALL.into_iter().enumerate() {
        let samples = paired_samples(&subjects, o);
        let base: Vec<f64> = samples.iter().map(|s| s.baseline).collect();
        let assist: Vec<f64> = samples.iter().map(|s| s.assisted).collect();
        let seed = derive(&[settings.seed, k as u64]);
        let deltas: Vec<f64> = match o {
            Outcome::Rom => samples.iter().map(|s| 100.0 * s.delta / s.baseline).collect(),
            _ => samples.iter().map(|s| s.delta).collect(),
        };
        let contrast = paired_contrast(o.as_str(), &deltas, settings.b_resamples, settings.confidence, seed)?;
        if !contrast.ci_contains_estimate() {
            warnings.push(alloc::format!(
                "{}: estimate {:.4} outside interval [{:.4}, {:.4}]",
                o,
                contrast.median_delta,
                contrast.ci_low,
                contrast.ci_high
            ));
        }
        if o == Outcome::Rom {
            let deg: Vec<f64> = samples.iter().map(|s| s.delta).collect();
            let c = paired_contrast("rom_deg", &deg, settings.b_resamples, settings.confidence, derive(&[settings.seed, 100]))?;
            rom_pct_of_cohort_median = 100.0 * c.median_delta / num::median(&base).unwrap_or(f64::NAN);
            rom_delta_deg = Some(c);
        }
        let trimmed_mean = match o {
            Outcome::Rom => super::trimmed_mean(&deltas, settings.trim)
                .ok_or_else(|| Error::invalid("trim", "must lie in [0, 0.5)"))?,
            _ => trimmed_mean_contrast(&samples, settings.trim)?,
        };
        if trimmed_mean.untrimmed_fallback {
            warnings.push(alloc::format!("{o}: too few subjects to trim, plain mean reported"));
        }
        outcomes.push(OutcomeRow {
            outcome: o,
            baseline: MedianIqr::of(&base).ok_or(Error::EmptyInput)?,
            assisted: MedianIqr::of(&assist).ok_or(Error::EmptyInput)?,
            effect_label: effect_label(contrast.cliffs_delta).map(String::from),
            contrast,
            trimmed_mean,
        });
    }

    let sensitivity = task_resample_sensitivity(rows, settings.sensitivity_resamples, derive(&[settings.seed, 200]))?
        .into_iter()
        .map(|r| {
            let v = num::sorted(&r.resample_deltas);
            SensitivitySummary {
                outcome: r.outcome,
                point_delta: r.point_delta,
                q025: num::quantile_sorted(&v, 0.025),
                q975: num::quantile_sorted(&v, 0.975),
                sign_consistency: r.sign_consistency,
                n_subjects: r.n_subjects,
                skipped_subjects: r.skipped_subjects,
            }
        })
        .collect();

    Ok(Report {
        n_subjects: subjects.len(),
        subjects: subjects.iter().map(|s| s.subject_id.clone()).collect(),
        unpaired_subjects,
        excluded_sessions,
        outcomes,
        rom_delta_deg: rom_delta_deg.ok_or(Error::EmptyInput)?,
        rom_pct_of_cohort_median,
        responders: responder_table(&subjects, &settings.thresholds),
        technical,
        sensitivity,
        settings: *settings,
        warnings,
        footer: MULTIPLICITY_NOTE.to_string(),
    })
}

fn cell(m: &MedianIqr, digits: usize) -> String {
    alloc::format!("{:.*} [{:.*}, {:.*}]", digits, m.median, digits, m.q1, digits, m.q3)
}

/// Plain-text tables for the outcome contrasts, the technical endpoints and
/// the responder counts.
pub fn render_report(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Outcomes (subject-level medians), n = {}", report.n_subjects);
    let _ = writeln!(
        s,
        "{:<22} {:<26} {:<26} {:<30} {:>8} {:>7}",
        "Outcome", "Baseline", "Assisted", "Delta [95% CI]", "p", "delta"
    );
    for r in &report.outcomes {
        let digits = match r.outcome {
            Outcome::Ti | Outcome::FatigueSlope => 3,
            _ => 2,
        };
        let c = &r.contrast;
        let change = match r.outcome {
            Outcome::Rom => alloc::format!("{:+.2}% [{:+.2}, {:+.2}]", c.median_delta, c.ci_low, c.ci_high),
            _ => alloc::format!("{:+.*} [{:+.*}, {:+.*}]", digits, c.median_delta, digits, c.ci_low, digits, c.ci_high),
        };
        let (b, a) = match r.outcome {
            Outcome::FatigueSlope => (String::from("--"), String::from("--")),
            _ => (cell(&r.baseline, digits), cell(&r.assisted, digits)),
        };
        let _ = writeln!(
            s,
            "{:<22} {:<26} {:<26} {:<30} {:>8.4} {:>+7.2}{}",
            r.outcome.label(),
            b,
            a,
            change,
            c.p_exact,
            c.cliffs_delta,
            r.effect_label.as_deref().map(|l| alloc::format!("  ({l})")).unwrap_or_default()
        );
    }
    let rd = &report.rom_delta_deg;
    let _ = writeln!(
        s,
        "ROM change in degrees: {:+.2} [{:+.2}, {:+.2}]; as percent of cohort baseline median: {:+.2}%",
        rd.median_delta, rd.ci_low, rd.ci_high, report.rom_pct_of_cohort_median
    );
    let _ = writeln!(s, "\nTrimmed-mean deltas (trim {:.2})", report.settings.trim);
    for r in &report.outcomes {
        let _ = writeln!(s, "  {:<22} {:+.4}", r.outcome.label(), r.trimmed_mean.value);
    }
    if !report.sensitivity.is_empty() {
        let _ = writeln!(s, "\nTask-resampling sensitivity");
        for r in &report.sensitivity {
            let _ = writeln!(
                s,
                "  {:<22} point {:+.4}, 95% range [{:+.4}, {:+.4}], sign kept {:.1}%",
                r.outcome.label(),
                r.point_delta,
                r.q025,
                r.q975,
                100.0 * r.sign_consistency
            );
        }
    }
    if let Some(t) = &report.technical {
        let _ = writeln!(s, "\nTechnical endpoints");
        let _ = writeln!(s, "  Control-loop rate       {:.0} Hz", t.loop_rate_hz);
        let _ = writeln!(s, "  Median latency          {:.2} ms", t.median_latency_ms);
        let _ = writeln!(s, "  95th percentile latency {:.2} ms", t.p95_latency_ms);
        let _ = writeln!(s, "  Session completion      {:.0}%", t.completion_pct);
        let _ = writeln!(s, "  Adverse events          {}", t.adverse_events);
        let _ = writeln!(s, "  Missed deadlines        {}", t.missed_deadlines);
    }
    let _ = writeln!(s, "\nResponders");
    for r in &report.responders {
        let _ = writeln!(s, "  {:<20} threshold {:<6} {:>2} / {:<2} {:>5.1}%", r.criterion, r.threshold, r.count, r.n, r.percent);
    }
    if !report.excluded_sessions.is_empty() {
        let _ = writeln!(s, "\nExcluded sessions");
        for e in &report.excluded_sessions {
            let _ = writeln!(s, "  {}: {}", e.session_key, e.reason);
        }
    }
    if !report.unpaired_subjects.is_empty() {
        let _ = writeln!(s, "Subjects without both conditions: {}", report.unpaired_subjects.join(", "));
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "\n{}", report.footer);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Condition;
    use crate::signalgen::TaskKind;

    fn rows(n: usize) -> Vec<SessionSummaryRow> {
        let mut v = Vec::new();
        for i in 0..n {
            for c in [Condition::Baseline, Condition::Assisted] {
                let a = (c == Condition::Assisted) as u8 as f64;
                v.push(SessionSummaryRow {
                    subject_id: alloc::format!("S{i:02}"),
                    task: TaskKind::PushExtend,
                    condition: c,
                    ti_median: 0.45 - a * (0.08 + 0.002 * i as f64),
                    rom_deg: 80.0 + a * (8.0 + i as f64),
                    reps_per_min: 10.0 + a * 3.0,
                    fmed_slope_hz_per_min: -0.4 + a * 0.1,
                    trial: 0,
                    excluded: false,
                    exclusion_reason: None,
                });
            }
        }
        v
    }

    fn quick() -> AnalysisSettings {
        AnalysisSettings { b_resamples: 1000, sensitivity_resamples: 20, ..Default::default() }
    }

    #[test]
    fn structure() {
        let r = analyze_cohort(&rows(8), &quick(), None).unwrap();
        assert_eq!(r.outcomes.len(), 4);
        assert_eq!(r.responders.len(), 3);
        let text = render_report(&r);
        assert!(text.contains(MULTIPLICITY_NOTE));
        assert!(text.contains(super::super::LARGE_EFFECT_LABEL));
    }

    #[test]
    fn empty_and_tiny_cohorts_error() {
        assert_eq!(analyze_cohort(&[], &quick(), None), Err(Error::EmptyInput));
        assert!(matches!(analyze_cohort(&rows(2), &quick(), None), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn excluded_session_reduces_n() {
        let mut v = rows(6);
        v[1].excluded = true;
        v[1].exclusion_reason = Some("missingness 6.0% on imu_accel".into());
        let r = analyze_cohort(&v, &quick(), None).unwrap();
        assert_eq!(r.n_subjects, 5);
        assert_eq!(r.excluded_sessions.len(), 1);
        assert_eq!(r.unpaired_subjects, ["S00"]);
    }
}
