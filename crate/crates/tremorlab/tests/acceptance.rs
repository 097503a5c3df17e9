//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. `TREMORLAB_ACCEPTANCE=ti,wilcoxon` runs a subset by key.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tremorlab::clock::MonotonicClock;
use tremorlab::commands::{cmd_analyze, cmd_simulate, controller_for, ANALYSIS_DIR, REPORT_JSON};
use tremorlab::RunConfig;
use tremorlab_core::assist::{
    apply_envelope, run_loop, ClampFlag, LoopInput, Measurement, SafetyEnvelope, SafetyState, TickClock,
};
use tremorlab_core::dsp::welch_psd;
use tremorlab_core::metrics::{session_outcomes, ti_series, tremor_index, TiSettings};
use tremorlab_core::num;
use tremorlab_core::session::{run_qc, synchronize, ChannelConfig, Condition, SessionRecord};
use tremorlab_core::signalgen::{
    generate_cohort, generate_session, inject_missingness_on, CohortCalibration, MissingPattern, TaskKind, TaskSpec,
};
use tremorlab_core::stats::{bca_ci, cliffs_delta_signed, wilcoxon_exact, AnalysisSettings, Outcome, Report};

type Verdict = Result<String, String>;

struct Runner {
    only: Option<Vec<String>>,
    failed: Vec<&'static str>,
}

impl Runner {
    fn wants(&self, key: &str) -> bool {
        self.only.as_ref().is_none_or(|keys| keys.iter().any(|k| k == key))
    }

    fn run(&mut self, key: &'static str, title: &str, f: impl FnOnce() -> Verdict) {
        if !self.wants(key) {
            return;
        }
        let t = Instant::now();
        let verdict = f();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {title}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                println!("FAIL  {title}: {detail} [{secs:.1} s]");
                self.failed.push(key);
            }
        }
    }
}

fn require(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Verdict {
    let took = started.elapsed();
    require(took < budget, format!("{detail}; took {:.1} s of {} s", took.as_secs_f64(), budget.as_secs()))
}

fn tone_mix(rate: f64, secs: f64, tones: &[(f64, f64)]) -> Vec<f64> {
    let n = (rate * secs) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            tones.iter().map(|&(f, a)| a * (2.0 * PI * f * t).sin()).sum()
        })
        .collect()
}

/// Band power ratio from a plain rectangular-window periodogram of the
/// whole record, summing bins directly.
fn oracle_ti(x: &[f64], rate: f64) -> f64 {
    let n = x.len();
    let df = rate / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 1..n / 2 {
        let f = k as f64 * df;
        if f > 20.0 {
            break;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * PI * (k * i) as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        let p = re * re + im * im;
        if f >= 0.5 {
            den += p;
        }
        if (4.0..=12.0).contains(&f) {
            num += p;
        }
    }
    num / den
}

fn ti_pure_tones() -> Verdict {
    let rate = 200.0;
    let cases = [
        ("8 Hz", vec![(8.0, 1.0)]),
        ("2 Hz", vec![(2.0, 1.0)]),
        ("2+8 Hz", vec![(2.0, 1.0), (8.0, 1.0)]),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, tones) in cases {
        let x = tone_mix(rate, 10.0, &tones);
        let psd = welch_psd(&x[..400], rate, 200, 0.5).map_err(|e| e.to_string())?;
        let direct = tremor_index(&psd).map_err(|e| e.to_string())?.value;
        let windows: Vec<f64> = ti_series(&x, rate, &TiSettings::default())
            .map_err(|e| e.to_string())?
            .iter()
            .map(|t| t.value)
            .collect();
        let pipeline = num::median(&windows).unwrap_or(f64::NAN);
        let oracle = oracle_ti(&x, rate);
        let pass = |v: f64| match name {
            "8 Hz" => v >= 0.98,
            "2 Hz" => v <= 0.02,
            _ => (v - 0.50).abs() <= 0.02,
        };
        ok &= pass(direct) && pass(pipeline) && (direct - oracle).abs() <= 0.02;
        parts.push(format!("{name} TI {direct:.4} (windowed {pipeline:.4}, oracle {oracle:.4})"));
    }
    require(ok, parts.join("; "))
}

fn metric_round_trip() -> Verdict {
    let started = Instant::now();
    let profiles = generate_cohort(50, &CohortCalibration::default(), 0x5eed).map_err(|e| e.to_string())?;
    let channels = ChannelConfig::default_set();
    let (mut worst_ti, mut worst_rom, mut worst_reps) = (0.0f64, 0.0f64, 0.0f64);
    let mut sessions = 0;
    for (i, p) in profiles.iter().enumerate() {
        let task = TaskSpec::standard(TaskKind::ALL[i % TaskKind::ALL.len()]);
        for c in [Condition::Baseline, Condition::Assisted] {
            let rec = generate_session(p, &task, c, &channels).map_err(|e| e.to_string())?;
            let o = session_outcomes(&rec).map_err(|e| format!("{}: {e}", rec.session_key()))?;
            let expected_cycles = p.reps(c) * task.duration_s / 60.0;
            worst_ti = worst_ti.max((o.ti_median - p.ti(c)).abs());
            worst_rom = worst_rom.max((o.rom_deg - p.rom(c)).abs());
            worst_reps = worst_reps.max((o.rep_count as f64 - expected_cycles).abs());
            sessions += 1;
        }
    }
    let detail = format!(
        "{sessions} sessions, worst |ΔTI| {worst_ti:.4}, |ΔROM| {worst_rom:.3}°, |Δcycles| {worst_reps:.2}"
    );
    if worst_ti > 0.02 || worst_rom > 0.5 || worst_reps > 1.0 {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(120), detail)
}

struct CohortRun {
    root: PathBuf,
    report: Report,
    took: Duration,
}

fn full_cohort(root: PathBuf) -> Result<CohortRun, String> {
    let started = Instant::now();
    let cfg = RunConfig {
        output_root: root.clone(),
        ..RunConfig::default()
    };
    cmd_simulate(&cfg).map_err(|e| e.to_string())?;
    let settings = AnalysisSettings {
        b_resamples: 10_000,
        seed: cfg.seed,
        ..AnalysisSettings::default()
    };
    let report = cmd_analyze(&root, &settings).map_err(|e| e.to_string())?;
    Ok(CohortRun {
        root,
        report,
        took: started.elapsed(),
    })
}

fn table3(run: &CohortRun) -> Verdict {
    let r = &run.report;
    let get = |o: Outcome| r.outcome(o).map(|row| row.contrast.clone()).ok_or(format!("no {o:?} row"));
    let ti = get(Outcome::Ti)?;
    let rom = get(Outcome::Rom)?;
    let reps = get(Outcome::Reps)?;
    let fat = get(Outcome::FatigueSlope)?;
    let checks = [
        ("ΔTI", ti.median_delta, -0.11, -0.07),
        ("ROM gain %", rom.median_delta, 8.0, 17.0),
        ("ΔReps", reps.median_delta, 2.3, 3.7),
        ("fatigue shift", fat.median_delta, 0.06, 0.14),
    ];
    let mut ok = r.n_subjects == 12;
    let mut parts = vec![format!("n={}", r.n_subjects)];
    for (name, v, lo, hi) in checks {
        ok &= (lo..=hi).contains(&v);
        parts.push(format!("{name} {v:+.4} in [{lo}, {hi}]"));
    }
    let p_max = [&ti, &rom, &reps, &fat].iter().map(|c| c.p_exact).fold(0.0, f64::max);
    ok &= p_max < 0.01;
    parts.push(format!("max p {p_max:.4}"));
    ok &= run.took < Duration::from_secs(300);
    parts.push(format!("simulate+analyze {:.1} s", run.took.as_secs_f64()));
    require(ok, parts.join(", "))
}

/// Exact p by enumerating every one of the 2ⁿ sign vectors over all deltas,
/// zeros included. A zero keeps rank 0 whatever its sign.
fn enumerated_p(d: &[f64]) -> f64 {
    let nonzero: Vec<f64> = d.iter().filter(|x| **x != 0.0).map(|x| x.abs()).collect();
    let rank = |a: f64| -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        let below = nonzero.iter().filter(|b| **b < a).count() as f64;
        let tied = nonzero.iter().filter(|b| **b == a).count() as f64;
        below + (tied + 1.0) / 2.0
    };
    let ranks: Vec<f64> = d.iter().map(|x| rank(x.abs())).collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        le += (w <= observed + 1e-9) as u64;
        ge += (w >= observed - 1e-9) as u64;
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(688);
    let (mut with_ties, mut with_zeros, mut worst) = (0, 0, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(3..=10);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-6i32..=6) as f64 * 0.5).collect();
        let mut mags: Vec<f64> = d.iter().filter(|x| **x != 0.0).map(|x| x.abs()).collect();
        mags.sort_by(f64::total_cmp);
        with_ties += mags.windows(2).any(|w| w[0] == w[1]) as usize;
        with_zeros += d.contains(&0.0) as usize;
        worst = worst.max((wilcoxon_exact(&d) - enumerated_p(&d)).abs());
    }
    let detail = format!("200 datasets ({with_ties} with ties, {with_zeros} with zeros), max |Δp| {worst:.2e}");
    if worst > 1e-12 || with_ties == 0 || with_zeros == 0 {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(60), detail)
}

fn bca_coverage() -> Verdict {
    let started = Instant::now();
    let truth = -0.09;
    let noise = Normal::new(truth, 0.05).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(689);
    let median = |x: &[f64]| num::median(x).unwrap_or(f64::NAN);
    let mut covered = 0;
    for cohort in 0..1000u64 {
        let data: Vec<f64> = (0..12).map(|_| noise.sample(&mut rng)).collect();
        let ci = bca_ci(&data, &median, 2000, 0.95, cohort).map_err(|e| e.to_string())?;
        covered += (ci.low <= truth && truth <= ci.high) as usize;
    }
    let pct = covered as f64 / 10.0;
    let detail = format!("{covered}/1000 cohorts covered ({pct:.1}%), B=2000");
    if !(90.0..=98.0).contains(&pct) {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(600), detail)
}

fn cliffs_anchors() -> Verdict {
    let pattern = |neg: usize, pos: usize, zero: usize| {
        let mut v = vec![-1.0; neg];
        v.extend(std::iter::repeat_n(1.0, pos));
        v.extend(std::iter::repeat_n(0.0, zero));
        v
    };
    let cases = [
        ("11−/1+", pattern(11, 1, 0), -10.0 / 12.0, -0.83),
        ("10+/1−/1 zero", pattern(1, 10, 1), 9.0 / 12.0, 0.75),
        ("11+/1 zero", pattern(0, 11, 1), 11.0 / 12.0, 0.92),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, v, exact, table) in cases {
        let d = cliffs_delta_signed(&v);
        ok &= (d - exact).abs() < 1e-12 && ((d * 100.0).round() / 100.0 - table).abs() < 1e-12;
        parts.push(format!("{name} {d:+.3}"));
    }
    require(ok, parts.join(", "))
}

fn safety_envelope() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(691);
    let dt = 0.01;
    let mut violations: Vec<String> = Vec::new();
    let mut worst_stall_lag = 0.0f64;
    for case in 0..10_000 {
        let env = SafetyEnvelope {
            angle_min_deg: 0.0,
            angle_max_deg: 150.0,
            torque_max: rng.random_range(0.1..5.0),
            jerk_max: rng.random_range(1.0..2000.0),
            stall_threshold_dps: rng.random_range(0.5..10.0),
            stall_timeout_s: rng.random_range(0.05..2.0),
        };
        let eps = 1e-9 * env.torque_max;

        // Arbitrary requests and measurements.
        let mut state = SafetyState::default();
        let (mut prev, mut prev2) = (0.0, 0.0);
        let mut off = false;
        for _ in 0..rng.random_range(1..300) {
            let meas = Measurement {
                angle_deg: rng.random_range(-20.0..170.0),
                velocity_dps: rng.random_range(-50.0..50.0),
            };
            let cmd = apply_envelope(&env, rng.random_range(-10.0..10.0), &mut state, meas, dt);
            let u = cmd.commanded_torque;
            if u.abs() > env.torque_max + eps {
                violations.push(format!("case {case}: torque {u} over {}", env.torque_max));
            }
            if off && (cmd.engaged || u != 0.0) {
                violations.push(format!("case {case}: re-engaged without reset"));
            }
            if !off && cmd.engaged {
                let second = u - 2.0 * prev + prev2;
                if second.abs() > env.jerk_max * dt * dt * (1.0 + 1e-9) + eps {
                    violations.push(format!("case {case}: jerk {second}"));
                }
            }
            off |= !cmd.engaged;
            (prev2, prev) = (prev, u);
        }

        // Scripted stall: full request, joint moving, then blocked.
        let mut state = SafetyState::default();
        let moving = Measurement {
            angle_deg: 60.0,
            velocity_dps: env.stall_threshold_dps + 20.0,
        };
        let blocked = Measurement {
            angle_deg: 60.0,
            velocity_dps: 0.0,
        };
        for _ in 0..rng.random_range(50..150) {
            apply_envelope(&env, env.torque_max, &mut state, moving, dt);
        }
        let mut first_stalled = None;
        let mut off_at = None;
        for _ in 0..((env.stall_timeout_s / dt) as usize + 400) {
            let loaded = state.prev[0].abs() > 0.5 * env.torque_max;
            let cmd = apply_envelope(&env, env.torque_max, &mut state, blocked, dt);
            if loaded && first_stalled.is_none() {
                first_stalled = Some(cmd.tick_index);
            }
            if !cmd.engaged {
                if !cmd.has(ClampFlag::StallTimeout) {
                    violations.push(format!("case {case}: disengaged without the stall flag"));
                }
                off_at = Some(cmd.tick_index);
                break;
            }
        }
        match (first_stalled, off_at) {
            (Some(a), Some(b)) => {
                let lag = (b - a) as f64 * dt - env.stall_timeout_s;
                worst_stall_lag = worst_stall_lag.max(lag);
                if !(lag > -1e-9 && lag <= dt + 1e-9) {
                    violations.push(format!("case {case}: stall disengaged {lag:+.4} s past the timeout"));
                }
            }
            _ => violations.push(format!("case {case}: stall never disengaged")),
        }
        for _ in 0..50 {
            let cmd = apply_envelope(&env, env.torque_max, &mut state, moving, dt);
            if cmd.engaged || cmd.commanded_torque != 0.0 {
                violations.push(format!("case {case}: stall disengage did not persist"));
                break;
            }
        }
        state.reset();
        if !apply_envelope(&env, env.torque_max, &mut state, moving, dt).engaged {
            violations.push(format!("case {case}: reset did not re-engage"));
        }
    }
    let detail = format!(
        "10000 envelope/input pairs, {} violations, worst stall lag past timeout {:.4} s",
        violations.len(),
        worst_stall_lag
    );
    match violations.first() {
        None => Ok(detail),
        Some(v) => Err(format!("{detail}; first: {v}")),
    }
}

/// Records how late each tick woke relative to its schedule.
struct WakeLog {
    inner: MonotonicClock,
    origin: Option<f64>,
    late_s: Vec<f64>,
}

impl TickClock for WakeLog {
    fn now_s(&mut self) -> f64 {
        self.inner.now_s()
    }

    fn wait_for_tick(&mut self, tick: u64, period_s: f64) -> bool {
        let on_time = self.inner.wait_for_tick(tick, period_s);
        let now = self.inner.now_s();
        let origin = *self.origin.get_or_insert(now);
        self.late_s.push((now - origin - tick as f64 * period_s).max(0.0));
        on_time
    }
}

/// Hypervisor steal time in clock ticks, where the kernel reports it.
fn steal_ticks() -> Option<u64> {
    let stat = fs::read_to_string("/proc/stat").ok()?;
    stat.lines().next()?.split_whitespace().nth(8)?.parse().ok()
}

fn loop_performance() -> Verdict {
    let cfg = RunConfig::default();
    let profile = generate_cohort(2, &cfg.calibration, cfg.seed).map_err(|e| e.to_string())?.remove(0);
    let rec = generate_session(&profile, &TaskSpec::standard(TaskKind::PushExtend), Condition::Assisted, &ChannelConfig::default_set())
        .map_err(|e| e.to_string())?;
    let view = synchronize(&rec.channels).map_err(|e| e.to_string())?;
    let input = LoopInput::from_view(&view, cfg.assist.lookahead_s).map_err(|e| e.to_string())?;
    let mut controller = controller_for(&cfg, &rec, cfg.assist.level).map_err(|e| e.to_string())?;
    let mut clock = WakeLog {
        inner: MonotonicClock::paced(1.0),
        origin: None,
        late_s: Vec::with_capacity(12_000),
    };
    let steal_before = steal_ticks();
    let (commands, stats) = run_loop(&input, &mut controller, 120.0, &mut clock, None);
    let stolen = match (steal_before, steal_ticks()) {
        (Some(a), Some(b)) => format!("{} ticks", b.saturating_sub(a)),
        _ => "unknown".to_string(),
    };
    let (med, p95) = (stats.median_latency_s * 1e3, stats.p95_latency_s * 1e3);
    let max = stats.per_tick_latency_s.iter().copied().fold(0.0, f64::max) * 1e3;
    let late_max = clock.late_s.iter().copied().fold(0.0, f64::max) * 1e3;
    let late_over_period = clock.late_s.iter().filter(|&&l| l > 0.01).count();
    let detail = format!(
        "{} ticks, {} commands, {} missed, {} underruns, median {med:.4} ms, p95 {p95:.4} ms, max {max:.3} ms; \
         wake-ups late by more than a period: {late_over_period}, worst {late_max:.1} ms; cpu steal {stolen}",
        stats.ticks,
        commands.len(),
        stats.missed_deadlines,
        stats.underruns
    );
    require(
        stats.ticks == 12_000 && commands.len() == 12_000 && stats.missed_deadlines == 0 && med <= 8.7 && p95 <= 9.9,
        detail,
    )
}

/// Adds an alternating ±`mv` electrode artifact to the primary EMG inside
/// `[t0, t1)` of the aligned trace, staying off the rails so the clipping
/// check is not triggered. Aligned time counts from the first packet.
fn add_artifact(rec: &mut SessionRecord, t0: f64, t1: f64, mv: f64) {
    let kind = rec.primary_emg().expect("session has EMG");
    let stream = rec.channels.get_mut(&kind).expect("stream present");
    let rate = stream.config.sample_rate_hz;
    let step = (mv / stream.config.to_physical(1)).round() as i32;
    let (lo, hi) = (stream.config.code_min() + 1, stream.config.code_max() - 1);
    let origin = stream.packets.iter().map(|p| (p.hub_timestamp_s * rate).round() as i64).min().unwrap_or(0);
    for p in &mut stream.packets {
        let at = (p.hub_timestamp_s * rate).round() as i64 - origin;
        for (j, c) in p.payload.iter_mut().enumerate() {
            let k = at + j as i64;
            let t = k as f64 / rate;
            if t >= t0 - 1e-9 && t < t1 - 1e-9 {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                *c = (*c + sign * step).clamp(lo, hi);
            }
        }
    }
}

fn qc_gate() -> Verdict {
    let cfg = RunConfig::default();
    let profile = generate_cohort(2, &cfg.calibration, 693).map_err(|e| e.to_string())?.remove(0);
    let task = TaskSpec {
        duration_s: 60.0,
        ..TaskSpec::standard(TaskKind::PushExtend)
    };
    let clean = generate_session(&profile, &task, Condition::Baseline, &ChannelConfig::default_set())
        .map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;

    let mut gate = (0, 0, 0);
    for kind in clean.channels.keys().copied().filter(|k| k.is_primary()) {
        for pattern in [MissingPattern::Random, MissingPattern::Burst] {
            for (frac, should_exclude) in [(0.06, true), (0.04, false)] {
                let rec = inject_missingness_on(&clean, kind, frac, pattern).map_err(|e| e.to_string())?;
                let qc = run_qc(&rec, 3.5);
                gate.0 += 1;
                if qc.excluded == should_exclude {
                    gate.1 += 1;
                } else {
                    gate.2 += 1;
                    parts.push(format!("{kind} {pattern:?} {:.0}% wrong", frac * 100.0));
                }
            }
        }
    }
    ok &= gate.2 == 0;
    parts.insert(0, format!("missingness gate {}/{} correct", gate.1, gate.0));

    let baseline_flags = run_qc(&clean, 3.5).outlier_window_indices;
    ok &= baseline_flags.is_empty();
    parts.push(format!("clean session flags {baseline_flags:?}"));

    // Three artifact spans; every 250 ms window overlapping one of them is a
    // constructed outlier.
    let (len, hop) = (0.25, 0.125);
    let spans = [(40usize, 1usize), (211, 1), (390, 2)];
    let mut rec = clean.clone();
    let mut expected = Vec::new();
    for &(first, count) in &spans {
        let t0 = first as f64 * hop;
        let t1 = t0 + len + (count - 1) as f64 * hop;
        add_artifact(&mut rec, t0, t1, 1.0);
        let windows = ((task.duration_s - len) / hop).floor() as usize + 1;
        expected.extend((0..windows).filter(|&i| {
            let (a, b) = (i as f64 * hop, i as f64 * hop + len);
            a < t1 - 1e-9 && b > t0 + 1e-9
        }));
    }
    expected.sort_unstable();
    expected.dedup();
    let qc = run_qc(&rec, 3.5);
    ok &= qc.outlier_window_indices == expected && !qc.excluded;
    parts.push(format!("flagged {:?}, constructed {:?}", qc.outlier_window_indices, expected));
    require(ok, parts.join("; "))
}

fn responders(run: &CohortRun) -> Verdict {
    let target = [7usize, 10, 11];
    let rows = &run.report.responders;
    let ok = rows.len() == 3 && rows.iter().zip(target).all(|(r, p)| r.count.abs_diff(p) <= 1);
    let detail = rows
        .iter()
        .zip(target)
        .map(|(r, p)| format!("{} {}/{} (target {p})", r.criterion, r.count, r.n))
        .collect::<Vec<_>>()
        .join(", ");
    require(ok, detail)
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
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

/// Report JSON with the wall-clock loop figures removed.
fn stripped_report(root: &Path) -> Result<serde_json::Value, String> {
    let bytes = fs::read(root.join(ANALYSIS_DIR).join(REPORT_JSON)).map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    if let Some(t) = v.get_mut("technical").and_then(|t| t.as_object_mut()) {
        for key in ["loop_rate_hz", "median_latency_ms", "p95_latency_ms", "missed_deadlines"] {
            t.remove(key);
        }
    }
    Ok(v)
}

fn determinism(first: &CohortRun, second_root: PathBuf) -> Verdict {
    let second = full_cohort(second_root)?;
    let (a, b) = (&first.root, &second.root);
    let fa = files_under(a);
    let fb = files_under(b);
    let rel = |root: &Path, v: &[PathBuf]| v.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect::<Vec<_>>();
    if rel(a, &fa) != rel(b, &fb) {
        return Err("the two runs wrote different file sets".into());
    }
    let mut channel_files = 0;
    let mut other_files = 0;
    for f in &fa {
        let r = f.strip_prefix(a).unwrap();
        let name = r.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if matches!(name, "loop_stats.json" | "tech.json" | "report.json" | "report.txt" | "run_config.toml") {
            continue;
        }
        if fs::read(f).map_err(|e| e.to_string())? != fs::read(b.join(r)).map_err(|e| e.to_string())? {
            return Err(format!("{} differs", r.display()));
        }
        if name.ends_with(".jsonl") && name != "assist_commands.jsonl" {
            channel_files += 1;
        } else {
            other_files += 1;
        }
    }
    let same_report = stripped_report(a)? == stripped_report(b)?;
    let keys_kept = stripped_report(a)?["technical"].as_object().map(|t| t.len()).unwrap_or(0);
    require(
        same_report && channel_files > 0,
        format!(
            "{channel_files} channel files and {other_files} other files identical, report JSON identical: {same_report} ({keys_kept} technical fields compared)"
        ),
    )
}

fn main() {
    let only = std::env::var("TREMORLAB_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').map(|k| k.trim().to_string()).collect());
    let mut runner = Runner { only, failed: Vec::new() };
    let scratch = tempfile::tempdir().expect("temp dir");

    runner.run("ti", "1 TI on pure tones", ti_pure_tones);
    runner.run("roundtrip", "2 metric round-trip on 50 profiles", metric_round_trip);
    runner.run("wilcoxon", "4 Wilcoxon exact p vs 2^n enumeration", wilcoxon_oracle);
    runner.run("bca", "5 BCa coverage over 1000 cohorts", bca_coverage);
    runner.run("cliff", "6 Cliff's delta anchors", cliffs_anchors);
    runner.run("safety", "7 safety envelope over random pairs", safety_envelope);
    runner.run("loop", "8 loop performance, 120 s paced", loop_performance);
    runner.run("qc", "9 QC gate and MAD outlier windows", qc_gate);

    let cohort_keys = ["table3", "responders", "determinism"];
    if cohort_keys.iter().any(|k| runner.wants(k)) {
        match full_cohort(scratch.path().join("run_a")) {
            Ok(run) => {
                runner.run("table3", "3 paired outcomes on the n=12 cohort", || table3(&run));
                runner.run("responders", "10 responder counts", || responders(&run));
                let second = scratch.path().join("run_b");
                runner.run("determinism", "11 determinism of simulate + analyze", || determinism(&run, second));
            }
            Err(e) => {
                for key in cohort_keys {
                    runner.run(key, key, || Err(format!("cohort run failed: {e}")));
                }
            }
        }
    }

    if runner.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed ({})", runner.failed.len(), runner.failed.join(", "));
        std::process::exit(1);
    }
}

