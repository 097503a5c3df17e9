use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{synchronize, ChannelKind, ChannelStream, SessionRecord};
use crate::dsp::windowize;
use crate::num;

pub const DEFAULT_MAD_THRESHOLD: f64 = 3.5;

/// Sessions with more than this lost fraction on any primary channel are
/// excluded.
pub const MAX_MISSINGNESS: f64 = 0.05;

const CLIP_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcSummary {
    pub missingness_per_channel: BTreeMap<ChannelKind, f64>,
    pub impedance_ok: bool,
    pub outlier_window_indices: Vec<usize>,
    pub clipped_channels: Vec<ChannelKind>,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

/// Lost fraction of a channel: flagged packets plus sequence gaps over the
/// sequence span starting at 0.
pub fn channel_missingness(stream: &ChannelStream) -> f64 {
    let Some(max_seq) = stream.packets.iter().map(|p| p.seq).max() else {
        return 1.0;
    };
    let total = max_seq + 1;
    let mut received: Vec<u64> = stream
        .packets
        .iter()
        .filter(|p| !p.loss_flag)
        .map(|p| p.seq)
        .collect();
    received.sort_unstable();
    received.dedup();
    (total - received.len() as u64) as f64 / total as f64
}

/// True when the stream holds at least three consecutive codes at either
/// representable extreme. Runs continue across adjacent received packets.
pub fn detect_clipping(stream: &ChannelStream) -> bool {
    let hi = stream.config.code_max();
    let lo = stream.config.code_min();
    let mut packets: Vec<_> = stream.packets.iter().collect();
    packets.sort_by_key(|p| p.seq);
    let mut run = 0usize;
    let mut run_code = 0i32;
    let mut last_seq: Option<u64> = None;
    for p in packets {
        if p.loss_flag || last_seq.map_or(false, |s| p.seq != s + 1) {
            run = 0;
        }
        last_seq = Some(p.seq);
        for &c in &p.payload {
            if c == hi || c == lo {
                run = if run > 0 && c == run_code { run + 1 } else { 1 };
                run_code = c;
                if run >= CLIP_RUN {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

/// Indices whose robust z-score `0.6745·(x − median)/MAD` exceeds the
/// threshold in magnitude. With zero MAD every value off the median is an
/// outlier.
pub fn mad_outliers(values: &[f64], threshold: f64) -> Vec<usize> {
    let Some(med) = num::median(values) else {
        return Vec::new();
    };
    let dev: Vec<f64> = values.iter().map(|x| libm::fabs(x - med)).collect();
    let mad = num::median(&dev).unwrap_or(0.0);
    values
        .iter()
        .enumerate()
        .filter(|(_, &x)| {
            if mad > 0.0 {
                libm::fabs(0.6745 * (x - med) / mad) > threshold
            } else {
                x != med
            }
        })
        .map(|(i, _)| i)
        .collect()
}

/// Per-window RMS of the primary EMG channel over the aligned trace. Windows
/// that touch a gap are not scored and their index is skipped.
fn emg_window_rms(record: &SessionRecord) -> Option<Vec<(usize, f64)>> {
    let kind = record.primary_emg()?;
    let view = synchronize(&record.channels).ok()?;
    let ch = view.get(kind)?;
    let rate = ch.sample_rate_hz;
    let filled: Vec<f64> = ch.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    Some(
        windowize(&filled, rate)
            .enumerate()
            .filter(|(_, w)| w.samples.iter().all(|x| !x.is_nan()))
            .map(|(i, w)| {
                let ms = w.samples.iter().map(|x| x * x).sum::<f64>() / w.samples.len() as f64;
                (i, libm::sqrt(ms))
            })
            .collect(),
    )
}

/// Quality control for one session. Exclusion follows missingness and
/// clipping only; impedance and outlier windows are reported.
pub fn run_qc(record: &SessionRecord, mad_threshold: f64) -> QcSummary {
    let missingness_per_channel: BTreeMap<ChannelKind, f64> = record
        .channels
        .iter()
        .map(|(&k, s)| (k, channel_missingness(s)))
        .collect();
    let clipped_channels: Vec<ChannelKind> = record
        .channels
        .iter()
        .filter(|(_, s)| detect_clipping(s))
        .map(|(&k, _)| k)
        .collect();

    let mut reasons: Vec<String> = Vec::new();
    for (k, m) in &missingness_per_channel {
        if k.is_primary() && *m > MAX_MISSINGNESS {
            reasons.push(format!("missingness {:.1}% on {k}", m * 100.0));
        }
    }
    for k in &clipped_channels {
        reasons.push(format!("clipping on {k}"));
    }

    let outlier_window_indices = match emg_window_rms(record) {
        Some(scored) => {
            let values: Vec<f64> = scored.iter().map(|&(_, r)| r).collect();
            mad_outliers(&values, mad_threshold)
                .into_iter()
                .map(|i| scored[i].0)
                .collect()
        }
        None => {
            if synchronize(&record.channels).is_err() {
                reasons.push(String::from("corrupt stream"));
            }
            Vec::new()
        }
    };

    let excluded = !reasons.is_empty();
    QcSummary {
        missingness_per_channel,
        impedance_ok: record.impedance_ok,
        outlier_window_indices,
        clipped_channels,
        excluded,
        exclusion_reason: excluded.then(|| reasons.join("; ")),
    }
}
