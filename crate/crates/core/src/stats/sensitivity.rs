use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{subject_level, Outcome, OutcomeValues, SessionSummaryRow};
use crate::signalgen::rng::Stream;
use crate::signalgen::TaskKind;
use crate::{num, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub outcome: Outcome,
    /// Median paired delta with every trial included.
    pub point_delta: f64,
    pub resample_deltas: Vec<f64>,
    /// Share of resamples whose median delta has the sign of `point_delta`.
    pub sign_consistency: f64,
    pub n_subjects: usize,
    pub skipped_subjects: Vec<String>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

type Trials<'a> = BTreeMap<TaskKind, Vec<OutcomeValues>>;

/// Redraws one trial per task for every subject and condition, with
/// replacement, and recomputes the median paired delta each time.
///
/// Subjects missing any task seen in the cohort, in either condition, are
/// skipped and listed. The full-data point estimate uses the same subjects.
pub fn task_resample_sensitivity(rows: &[SessionSummaryRow], resamples: usize, seed: u64) -> Result<Vec<SensitivityResult>> {
    if resamples == 0 {
        return Err(Error::invalid("resamples", "must be positive"));
    }
    let included: Vec<&SessionSummaryRow> = rows.iter().filter(|r| !r.excluded).collect();
    let tasks: BTreeSet<TaskKind> = included.iter().map(|r| r.task).collect();
    let mut by: BTreeMap<&str, [Trials<'_>; 2]> = BTreeMap::new();
    for r in &included {
        by.entry(r.subject_id.as_str()).or_default()[r.condition as usize]
            .entry(r.task)
            .or_default()
            .push(r.values());
    }
    let mut kept: Vec<(&str, &[Trials<'_>; 2])> = Vec::new();
    let mut skipped = Vec::new();
    for (id, conds) in &by {
        if conds.iter().all(|c| tasks.iter().all(|t| c.contains_key(t))) {
            kept.push((id, conds));
        } else {
            skipped.push(String::from(*id));
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(String::from("no subject covers every task in both conditions")));
    }
    let kept_rows: Vec<SessionSummaryRow> = included
        .iter()
        .filter(|r| kept.iter().any(|(id, _)| *id == r.subject_id))
        .map(|r| (*r).clone())
        .collect();
    let (subjects, _) = subject_level(&kept_rows);

    let mut rng = Stream::new(seed);
    let mut draws: Vec<[OutcomeValues; 2]> = Vec::with_capacity(kept.len());
    let mut per_outcome: [Vec<f64>; 4] = Default::default();
    let mut picked: Vec<OutcomeValues> = Vec::with_capacity(tasks.len());
    for _ in 0..resamples {
        draws.clear();
        for (_, conds) in &kept {
            let mut pair = [subjects[0].baseline; 2];
            for (c, trials) in conds.iter().enumerate() {
                picked.clear();
                for t in &tasks {
                    let v = &trials[t];
                    picked.push(v[rng.below(v.len())]);
                }
                pair[c] = OutcomeValues::median_of(&picked).unwrap_or(pair[c]);
            }
            draws.push(pair);
        }
        for (k, o) in Outcome::ALL.into_iter().enumerate() {
            let d: Vec<f64> = draws.iter().map(|[b, a]| o.value(a) - o.value(b)).collect();
            per_outcome[k].push(num::median(&d).unwrap_or(0.0));
        }
    }

    Ok(Outcome::ALL
        .into_iter()
        .zip(per_outcome)
        .map(|(o, resample_deltas)| {
            let d: Vec<f64> = subjects.iter().map(|s| o.value(&s.assisted) - o.value(&s.baseline)).collect();
            let point_delta = num::median(&d).unwrap_or(0.0);
            let agree = resample_deltas.iter().filter(|x| sign(**x) == sign(point_delta)).count();
            SensitivityResult {
                outcome: o,
                point_delta,
                sign_consistency: agree as f64 / resample_deltas.len() as f64,
                resample_deltas,
                n_subjects: subjects.len(),
                skipped_subjects: skipped.clone(),
            }
        })
        .collect())
}
