use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tremorlab_core::assist::{
    run_loop, AssistCommand, AssistController, LoopInput, LoopStats, NeedScoreModel, TickClock, TICK_PERIOD_S,
};
use tremorlab_core::metrics::{session_outcomes, StreamingFeaturesConfig};
use tremorlab_core::num::{self, MedianIqr};
use tremorlab_core::session::{run_qc, synchronize, ChannelConfig, ChannelKind, Condition, SessionRecord};
use tremorlab_core::signalgen::{
    generate_cohort, generate_session_with, inject_missingness, inject_missingness_on, SignalModel, SubjectProfile,
    TaskSpec,
};
use tremorlab_core::stats::{analyze_cohort, render_report, subject_level, AnalysisSettings, Outcome, Report, TechEndpoints};

use crate::clock::MonotonicClock;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{self, read_json, write_bytes, write_json, write_jsonl};

pub const RUN_CONFIG_TOML: &str = "run_config.toml";
pub const COHORT_JSON: &str = "cohort.json";
pub const TECH_JSON: &str = "tech.json";
pub const ASSIST_COMMANDS_JSONL: &str = "assist_commands.jsonl";
pub const LOOP_STATS_JSON: &str = "loop_stats.json";
pub const ANALYSIS_DIR: &str = "analysis";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const PLOTS_DIR: &str = "plots";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";

/// Outcomes with baseline and assisted cells, hence plot series.
pub const PLOTTED: [Outcome; 3] = [Outcome::Ti, Outcome::Rom, Outcome::Reps];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub root: PathBuf,
    pub sessions: usize,
    pub excluded: usize,
    pub technical: Option<TechEndpoints>,
}

pub fn stream_config(record: &SessionRecord, mains_hz: f64) -> StreamingFeaturesConfig {
    let rate = |k: ChannelKind, d: f64| record.channels.get(&k).map_or(d, |c| c.config.sample_rate_hz);
    let emg = record.primary_emg().unwrap_or(ChannelKind::EmgTriceps);
    StreamingFeaturesConfig {
        emg_rate_hz: rate(emg, 1000.0),
        accel_rate_hz: rate(ChannelKind::ImuAccel, 200.0),
        mains_hz,
        ..StreamingFeaturesConfig::default()
    }
}

pub fn controller_for(cfg: &RunConfig, record: &SessionRecord, level: f64) -> CliResult<AssistController<NeedScoreModel>> {
    Ok(AssistController::new(
        cfg.assist.need_model,
        cfg.envelope,
        cfg.assist.gains,
        level,
        stream_config(record, SignalModel::default().mains_hz),
    )?)
}

/// Replays a recorded session through the 100 Hz loop.
pub fn replay(
    cfg: &RunConfig,
    record: &SessionRecord,
    clock: &mut dyn TickClock,
) -> CliResult<(Vec<AssistCommand>, LoopStats)> {
    let view = synchronize(&record.channels)?;
    let input = LoopInput::from_view(&view, cfg.assist.lookahead_s)?;
    let level = if record.condition == Condition::Assisted { cfg.assist.level } else { 0.0 };
    let mut controller = controller_for(cfg, record, level)?;
    Ok(run_loop(&input, &mut controller, record.duration_s(), clock, None))
}

/// QC, then outcomes. A session whose outcomes cannot be computed is
/// excluded with the extraction error as its reason.
pub fn finalize(record: &mut SessionRecord, mad_threshold: f64) {
    let mut qc = run_qc(record, mad_threshold);
    record.outcomes = match session_outcomes(record) {
        Ok(o) => Some(o),
        Err(e) => {
            let reason = format!("outcome extraction failed: {e}");
            qc.exclusion_reason = Some(match qc.exclusion_reason.take() {
                Some(r) => format!("{r}; {reason}"),
                None => reason,
            });
            qc.excluded = true;
            None
        }
    };
    record.qc = Some(qc);
}

fn session_for(cfg: &RunConfig, profile: &SubjectProfile, task: &TaskSpec, c: Condition, trial: u32) -> CliResult<SessionRecord> {
    let mut record = generate_session_with(profile, task, c, &ChannelConfig::default_set(), &SignalModel::default(), trial)?;
    for m in &cfg.missingness {
        if m.subject_id == profile.subject_id && m.task == task.task_kind && m.condition == c {
            record = match m.channel {
                Some(ch) => inject_missingness_on(&record, ch, m.fraction, m.pattern)?,
                None => inject_missingness(&record, m.fraction, m.pattern)?,
            };
        }
    }
    Ok(record)
}

fn clear_outputs(root: &Path) -> CliResult<()> {
    let sessions = root.join(store::SESSIONS_DIR);
    if sessions.exists() {
        fs::remove_dir_all(&sessions).map_err(|e| CliError::io(&sessions, e))?;
    }
    for f in [store::SUMMARY_CSV, TECH_JSON] {
        let p = root.join(f);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
        }
    }
    Ok(())
}

fn tech_endpoints(stats: &[LoopStats], sessions: usize, included: usize) -> Option<TechEndpoints> {
    let ticks: u64 = stats.iter().map(|s| s.ticks).sum();
    if ticks == 0 {
        return None;
    }
    let missed: u64 = stats.iter().map(|s| s.missed_deadlines).sum();
    let lat = num::sorted(&stats.iter().flat_map(|s| s.per_tick_latency_s.iter().copied()).collect::<Vec<_>>());
    Some(TechEndpoints {
        loop_rate_hz: (ticks - missed) as f64 / (ticks as f64 * TICK_PERIOD_S),
        median_latency_ms: 1e3 * num::median_of_sorted(&lat),
        p95_latency_ms: 1e3 * num::quantile_sorted(&lat, 0.95),
        completion_pct: 100.0 * included as f64 / sessions as f64,
        adverse_events: 0,
        missed_deadlines: missed,
    })
}

/// Generates, checks and persists the cohort: subjects × tasks × trials ×
/// both conditions. Earlier session files and summaries under the output
/// root are replaced.
pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SimulateSummary> {
    cfg.validate()?;
    let root = cfg.output_root.clone();
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    clear_outputs(&root)?;
    write_bytes(&root.join(RUN_CONFIG_TOML), cfg.to_toml().as_bytes())?;

    let cohort = if cfg.cohort_size == 1 {
        let mut two = generate_cohort(2, &cfg.calibration, cfg.seed)?;
        two.truncate(1);
        two
    } else {
        generate_cohort(cfg.cohort_size, &cfg.calibration, cfg.seed)?
    };
    write_json(&root.join(COHORT_JSON), &cohort)?;

    let mut stats = Vec::new();
    let (mut sessions, mut excluded) = (0, 0);
    for (i, profile) in cohort.iter().enumerate() {
        for condition in cfg.order_for(i) {
            for &kind in &cfg.tasks {
                let task = TaskSpec {
                    duration_s: cfg.task_duration_s,
                    ..TaskSpec::standard(kind)
                };
                for trial in 0..cfg.trials_per_task {
                    let mut record = session_for(cfg, profile, &task, condition, trial)?;
                    finalize(&mut record, cfg.mad_threshold);
                    store::persist(&record, &root)?;
                    sessions += 1;
                    if record.qc.as_ref().is_some_and(|q| q.excluded) {
                        excluded += 1;
                    }
                    if cfg.assist.replay_loop && condition == Condition::Assisted {
                        let (commands, loop_stats) = replay(cfg, &record, &mut MonotonicClock::free_running())?;
                        let dir = store::session_dir(&root, &record.session_key());
                        write_jsonl(&dir.join(ASSIST_COMMANDS_JSONL), &commands)?;
                        write_json(&dir.join(LOOP_STATS_JSON), &loop_stats)?;
                        stats.push(loop_stats);
                    }
                }
            }
        }
    }
    let technical = tech_endpoints(&stats, sessions, sessions - excluded);
    if let Some(t) = &technical {
        write_json(&root.join(TECH_JSON), t)?;
    }
    Ok(SimulateSummary {
        root,
        sessions,
        excluded,
        technical,
    })
}

/// Runs the cohort statistics on `<root>/summary.csv` and writes
/// `analysis/report.json` and `analysis/report.txt`.
pub fn cmd_analyze(root: &Path, settings: &AnalysisSettings) -> CliResult<Report> {
    let rows = store::read_summary(&root.join(store::SUMMARY_CSV))?;
    let tech_path = root.join(TECH_JSON);
    let technical: Option<TechEndpoints> = if tech_path.exists() { Some(read_json(&tech_path)?) } else { None };
    let report = analyze_cohort(&rows, settings, technical)?;
    let dir = root.join(ANALYSIS_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_json(&dir.join(REPORT_JSON), &report)?;
    write_bytes(&dir.join(REPORT_TXT), render_report(&report).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub outcome: String,
    pub condition: Condition,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub subject_id: String,
    pub condition: Condition,
    pub ti: f64,
    pub rom_deg: f64,
    pub reps_per_min: f64,
    pub fmed_slope_hz_per_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutputs {
    pub text: String,
    pub outcome_series: Vec<PathBuf>,
    pub trajectories: PathBuf,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Renders the stored analysis and exports plot data: one median/IQR series
/// per plotted outcome and the paired subject trajectories.
pub fn cmd_report(root: &Path) -> CliResult<ReportOutputs> {
    let report_path = root.join(ANALYSIS_DIR).join(REPORT_JSON);
    if !report_path.is_file() {
        return Err(CliError::io(
            &report_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no analysis; run `analyze` first"),
        ));
    }
    let report: Report = read_json(&report_path)?;
    let rows = store::read_summary(&root.join(store::SUMMARY_CSV))?;
    let (subjects, _) = subject_level(&rows);
    let subjects: Vec<_> = subjects.into_iter().filter(|s| report.subjects.contains(&s.subject_id)).collect();

    let dir = root.join(PLOTS_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut outcome_series = Vec::new();
    for o in PLOTTED {
        let mut series = Vec::new();
        for c in [Condition::Baseline, Condition::Assisted] {
            let vals: Vec<f64> = subjects
                .iter()
                .map(|s| o.value(if c == Condition::Baseline { &s.baseline } else { &s.assisted }))
                .collect();
            let Some(m) = MedianIqr::of(&vals) else { continue };
            series.push(PlotRow {
                outcome: o.as_str().to_string(),
                condition: c,
                n: vals.len(),
                median: m.median,
                q1: m.q1,
                q3: m.q3,
            });
        }
        let path = dir.join(format!("outcome_{}.csv", o.as_str()));
        write_csv(&path, &series)?;
        outcome_series.push(path);
    }

    let mut traj = Vec::new();
    for s in &subjects {
        for (c, v) in [(Condition::Baseline, &s.baseline), (Condition::Assisted, &s.assisted)] {
            traj.push(TrajectoryRow {
                subject_id: s.subject_id.clone(),
                condition: c,
                ti: v.ti,
                rom_deg: v.rom_deg,
                reps_per_min: v.reps_per_min,
                fmed_slope_hz_per_min: v.fmed_slope_hz_per_min,
            });
        }
    }
    let trajectories = dir.join(TRAJECTORIES_CSV);
    write_csv(&trajectories, &traj)?;

    let text = render_report(&report);
    write_bytes(&root.join(ANALYSIS_DIR).join(REPORT_TXT), text.as_bytes())?;
    Ok(ReportOutputs {
        text,
        outcome_series,
        trajectories,
    })
}
