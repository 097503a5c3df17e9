use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tremorlab::commands::{cmd_analyze, cmd_report, cmd_simulate, ANALYSIS_DIR, REPORT_JSON, REPORT_TXT};
use tremorlab::config::MissingnessInjection;
use tremorlab::store::{self, SessionManifest};
use tremorlab::{CliError, RunConfig};
use tremorlab_core::session::{ChannelKind, Condition};
use tremorlab_core::signalgen::{MissingPattern, TaskKind};
use tremorlab_core::stats::{render_report, AnalysisSettings, Report};

fn quick_config(root: &Path, n: usize) -> RunConfig {
    RunConfig {
        cohort_size: n,
        seed: 11,
        task_duration_s: 60.0,
        output_root: root.to_path_buf(),
        ..RunConfig::default()
    }
}

fn quick_settings() -> AnalysisSettings {
    AnalysisSettings {
        b_resamples: 1000,
        seed: 5,
        sensitivity_resamples: 50,
        ..AnalysisSettings::default()
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn one_subject_one_task_gives_two_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        tasks: vec![TaskKind::PinchGrip],
        ..quick_config(tmp.path(), 1)
    };
    let t = std::time::Instant::now();
    let s = cmd_simulate(&cfg).unwrap();
    eprintln!("simulate took {:?}", t.elapsed());
    assert_eq!(s.sessions, 2);
    assert_eq!(store::list_sessions(tmp.path()).unwrap().len(), 2);
    let rows = store::read_summary(&tmp.path().join(store::SUMMARY_CSV)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].condition, Condition::Baseline);
    assert_eq!(rows[1].condition, Condition::Assisted);
    let header = fs::read_to_string(tmp.path().join(store::SUMMARY_CSV)).unwrap();
    assert!(header.starts_with(
        "subject_id,task,condition,ti_median,rom_deg,reps_per_min,fmed_slope_hz_per_min,trial,excluded,exclusion_reason\n"
    ));
    assert!(s.technical.is_some());
}

#[test]
fn persisted_sessions_reload_byte_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        tasks: vec![TaskKind::ReachHold],
        ..quick_config(&tmp.path().join("a"), 1)
    };
    cmd_simulate(&cfg).unwrap();
    let copy = tmp.path().join("b");
    // Re-persist in the original row order so the two summaries can match.
    let rows = store::read_summary(&cfg.output_root.join(store::SUMMARY_CSV)).unwrap();
    assert_eq!(rows.len(), store::list_sessions(&cfg.output_root).unwrap().len());
    for row in rows {
        let dir = store::session_dir(&cfg.output_root, &row.session_key());
        let record = store::load(&dir).unwrap();
        store::persist(&record, &copy).unwrap();
        let key = dir.file_name().unwrap();
        let again = store::load(&copy.join(store::SESSIONS_DIR).join(key)).unwrap();
        assert_eq!(record, again);
        for f in ["manifest.json", "emg_triceps.jsonl", "imu_accel.jsonl", "joint_angle.jsonl"] {
            assert_eq!(
                fs::read(dir.join(f)).unwrap(),
                fs::read(copy.join(store::SESSIONS_DIR).join(key).join(f)).unwrap(),
                "{f}"
            );
        }
    }
    assert_eq!(
        fs::read(cfg.output_root.join(store::SUMMARY_CSV)).unwrap(),
        fs::read(copy.join(store::SUMMARY_CSV)).unwrap()
    );
}

#[test]
fn excluded_session_manifest_carries_the_reason() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        tasks: vec![TaskKind::PushExtend],
        ..quick_config(tmp.path(), 2)
    };
    cfg.missingness.push(MissingnessInjection {
        subject_id: "S02".into(),
        task: TaskKind::PushExtend,
        condition: Condition::Assisted,
        channel: Some(ChannelKind::ImuAccel),
        fraction: 0.06,
        pattern: MissingPattern::Random,
    });
    let s = cmd_simulate(&cfg).unwrap();
    assert_eq!((s.sessions, s.excluded), (4, 1));
    let dir = store::session_dir(tmp.path(), "S02_push_extend_assisted_t0");
    let m: SessionManifest = serde_json::from_slice(&fs::read(dir.join(store::MANIFEST_JSON)).unwrap()).unwrap();
    assert!(m.qc.excluded);
    assert!(m.qc.exclusion_reason.unwrap().contains("imu_accel"));
    // Two sessions of the same subject: two manifests and two rows.
    let rows = store::read_summary(&tmp.path().join(store::SUMMARY_CSV)).unwrap();
    assert_eq!(rows.iter().filter(|r| r.subject_id == "S01").count(), 2);
    assert!(store::session_dir(tmp.path(), "S01_push_extend_baseline_t0").join(store::MANIFEST_JSON).is_file());
    assert!(store::session_dir(tmp.path(), "S01_push_extend_assisted_t0").join(store::MANIFEST_JSON).is_file());
}

#[test]
fn analyze_and_report_on_a_small_cohort() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config(tmp.path(), 5);
    cfg.tasks = vec![TaskKind::PushExtend, TaskKind::PinchGrip];
    cfg.assist.replay_loop = false;
    for task in [TaskKind::PushExtend, TaskKind::PinchGrip] {
        cfg.missingness.push(MissingnessInjection {
            subject_id: "S03".into(),
            task,
            condition: Condition::Baseline,
            channel: None,
            fraction: 0.10,
            pattern: MissingPattern::Burst,
        });
    }
    cmd_simulate(&cfg).unwrap();
    let report = cmd_analyze(tmp.path(), &quick_settings()).unwrap();
    assert_eq!(report.outcomes.len(), 4);
    assert_eq!(report.n_subjects, 4);
    assert_eq!(report.unpaired_subjects, vec!["S03".to_string()]);
    assert_eq!(report.excluded_sessions.len(), 2);
    assert!(report.technical.is_none());

    let out = cmd_report(tmp.path()).unwrap();
    assert_eq!(out.outcome_series.len(), 3);
    let traj = fs::read_to_string(&out.trajectories).unwrap();
    assert_eq!(traj.lines().count(), 1 + 2 * 4);
    let stored: Report =
        serde_json::from_slice(&fs::read(tmp.path().join(ANALYSIS_DIR).join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(render_report(&stored), out.text);
    assert_eq!(fs::read_to_string(tmp.path().join(ANALYSIS_DIR).join(REPORT_TXT)).unwrap(), out.text);
    for p in &out.outcome_series {
        assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 3);
    }
}

#[test]
fn analysis_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = cmd_analyze(&tmp.path().join("nothing"), &quick_settings()).unwrap_err();
    assert_eq!(missing.exit_code(), CliError::EXIT_IO);
    let no_report = cmd_report(tmp.path()).unwrap_err();
    assert_eq!(no_report.exit_code(), CliError::EXIT_IO);

    let mut cfg = quick_config(tmp.path(), 2);
    cfg.tasks = vec![TaskKind::PinchGrip];
    cfg.assist.replay_loop = false;
    cmd_simulate(&cfg).unwrap();
    let few = cmd_analyze(tmp.path(), &quick_settings()).unwrap_err();
    assert_eq!(few.exit_code(), CliError::EXIT_INSUFFICIENT, "{few}");

    fs::write(tmp.path().join(store::SUMMARY_CSV), "subject_id,task\n").unwrap();
    let empty = cmd_analyze(tmp.path(), &quick_settings()).unwrap_err();
    assert_eq!(empty.exit_code(), CliError::EXIT_INSUFFICIENT, "{empty}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tremorlab");
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();

    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["config"]), 0);
    assert_eq!(code(&["bogus"]), 2);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "cohort_size = 0\n").unwrap();
    assert_eq!(code(&["--config", bad.to_str().unwrap(), "config"]), 2);
    assert_eq!(code(&["analyze", "--thresholds", "ti=x"]), 2);
    assert_eq!(code(&["--config", tmp.path().join("absent.toml").to_str().unwrap(), "config"]), 3);
    assert_eq!(code(&["analyze", "--input", tmp.path().join("none").to_str().unwrap()]), 3);

    let printed = Command::new(bin).arg("config").output().unwrap().stdout;
    let cfg = RunConfig::from_toml_str(std::str::from_utf8(&printed).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn rerun_reproduces_every_deterministic_file() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = quick_config(&tmp.path().join(name), 3);
        cfg.tasks = vec![TaskKind::PushExtend];
        cmd_simulate(&cfg).unwrap();
        cmd_analyze(&cfg.output_root, &quick_settings()).unwrap();
        cfg.output_root
    };
    let (a, b) = (run("a"), run("b"));
    let fa = files_under(&a);
    assert_eq!(fa.len(), files_under(&b).len());
    let mut compared = 0;
    for f in fa {
        let rel = f.strip_prefix(&a).unwrap();
        let name = rel.file_name().unwrap().to_str().unwrap();
        if matches!(name, "loop_stats.json" | "tech.json" | "report.json" | "report.txt" | "run_config.toml") {
            continue;
        }
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(rel)).unwrap(), "{}", rel.display());
        compared += 1;
    }
    assert!(compared > 10);
    let strip = |root: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&fs::read(root.join(ANALYSIS_DIR).join(REPORT_JSON)).unwrap()).unwrap();
        v["technical"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}
