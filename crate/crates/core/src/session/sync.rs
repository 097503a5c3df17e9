use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ChannelKind, ChannelStream, SamplePacket};
use crate::{Error, Result};

/// A stretch of an aligned channel with no data, in samples and seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSpan {
    pub start_index: usize,
    pub len: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

/// A contiguous stretch of present samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run<'a> {
    pub start_index: usize,
    pub samples: &'a [f64],
}

/// One channel on the hub time base. `values[i]` is `None` inside a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedChannel {
    pub channel_kind: ChannelKind,
    pub sample_rate_hz: f64,
    pub start_s: f64,
    pub values: Vec<Option<f64>>,
    pub null_spans: Vec<NullSpan>,
}

impl AlignedChannel {
    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate_hz
    }

    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Contiguous present stretches. The data are copied once into a dense
    /// buffer so each run borrows a plain slice.
    pub fn runs(&self) -> RunSet {
        let mut dense = Vec::with_capacity(self.values.len());
        let mut bounds = Vec::new();
        let mut open: Option<(usize, usize)> = None;
        for (i, v) in self.values.iter().enumerate() {
            match (v, open) {
                (Some(x), None) => {
                    open = Some((i, dense.len()));
                    dense.push(*x);
                }
                (Some(x), Some(_)) => dense.push(*x),
                (None, Some((s, d))) => {
                    bounds.push((s, d, dense.len()));
                    open = None;
                }
                (None, None) => {}
            }
        }
        if let Some((s, d)) = open {
            bounds.push((s, d, dense.len()));
        }
        RunSet { dense, bounds }
    }

    /// Values with gaps removed; only valid for gap-free analysis paths when
    /// `null_spans` is empty.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    dense: Vec<f64>,
    bounds: Vec<(usize, usize, usize)>,
}

impl RunSet {
    pub fn iter(&self) -> impl Iterator<Item = Run<'_>> + '_ {
        self.bounds.iter().map(move |&(start, lo, hi)| Run {
            start_index: start,
            samples: &self.dense[lo..hi],
        })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultichannelView {
    pub channels: BTreeMap<ChannelKind, AlignedChannel>,
}

impl MultichannelView {
    pub fn get(&self, kind: ChannelKind) -> Option<&AlignedChannel> {
        self.channels.get(&kind)
    }

    pub fn duration_s(&self) -> f64 {
        self.channels
            .values()
            .map(|c| c.start_s + c.duration_s())
            .fold(0.0, f64::max)
    }
}

fn sample_index(ts: f64, rate: f64) -> i64 {
    libm::round(ts * rate) as i64
}

fn align_one(kind: ChannelKind, stream: &ChannelStream) -> Result<AlignedChannel> {
    let rate = stream.config.sample_rate_hz;
    let mut packets: Vec<&SamplePacket> = stream.packets.iter().collect();
    packets.sort_by_key(|p| p.seq);

    for pair in packets.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.seq == b.seq || b.hub_timestamp_s < a.hub_timestamp_s {
            return Err(Error::CorruptStream { channel: kind, seq: b.seq });
        }
    }
    if let Some(p) = packets.iter().find(|p| p.channel_kind != kind) {
        return Err(Error::CorruptStream { channel: kind, seq: p.seq });
    }

    let Some(first) = packets.first() else {
        return Ok(AlignedChannel {
            channel_kind: kind,
            sample_rate_hz: rate,
            start_s: 0.0,
            values: Vec::new(),
            null_spans: Vec::new(),
        });
    };
    let origin = sample_index(first.hub_timestamp_s, rate);
    let start_s = origin as f64 / rate;

    // The nominal packet length covers a lost packet at the very end, where no
    // successor timestamp bounds it.
    let mut lens: Vec<usize> = packets
        .iter()
        .filter(|p| !p.loss_flag)
        .map(|p| p.payload.len())
        .collect();
    lens.sort_unstable();
    let nominal = lens.get(lens.len() / 2).copied().unwrap_or(0);

    let mut values: Vec<Option<f64>> = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        let at = (sample_index(p.hub_timestamp_s, rate) - origin).max(0) as usize;
        if values.len() < at {
            values.resize(at, None);
        }
        if values.len() > at && !p.loss_flag {
            // Overlapping packets: the later packet wins from its own start.
            values.truncate(at);
        }
        if p.loss_flag {
            let end = match packets.get(i + 1) {
                Some(next) => (sample_index(next.hub_timestamp_s, rate) - origin).max(0) as usize,
                None => at + nominal,
            };
            if values.len() < end {
                values.resize(end, None);
            }
        } else {
            values.extend(p.payload.iter().map(|&c| Some(stream.config.to_physical(c))));
        }
    }

    let mut null_spans = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i].is_none() {
            let s = i;
            while i < values.len() && values[i].is_none() {
                i += 1;
            }
            null_spans.push(NullSpan {
                start_index: s,
                len: i - s,
                start_s: start_s + s as f64 / rate,
                duration_s: (i - s) as f64 / rate,
            });
        } else {
            i += 1;
        }
    }

    Ok(AlignedChannel {
        channel_kind: kind,
        sample_rate_hz: rate,
        start_s,
        values,
        null_spans,
    })
}

/// Places every channel on the hub time base by sequence order. Packets may
/// arrive in any order; duplicate sequence numbers or timestamps that run
/// backwards against sequence order are corrupt. Lost packets become explicit
/// null spans whose length follows from the surrounding timestamps.
pub fn synchronize(channels: &BTreeMap<ChannelKind, ChannelStream>) -> Result<MultichannelView> {
    let mut out = BTreeMap::new();
    for (&kind, stream) in channels {
        out.insert(kind, align_one(kind, stream)?);
    }
    Ok(MultichannelView { channels: out })
}
