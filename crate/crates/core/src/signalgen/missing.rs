use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rng::{derive, Stream};
use crate::session::{ChannelKind, SessionRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPattern {
    /// Lost packets scattered uniformly.
    Random,
    /// One contiguous run of lost packets.
    Burst,
}

fn key_seed(record: &SessionRecord, kind: ChannelKind) -> u64 {
    // FNV-1a over the session key, so the choice of lost packets is a pure
    // function of the record identity.
    let key = record.session_key();
    let h = key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    derive(&[h, kind as u64])
}

/// Marks `fraction` of the packets of every channel lost.
pub fn inject_missingness(record: &SessionRecord, fraction: f64, pattern: MissingPattern) -> Result<SessionRecord> {
    let kinds: Vec<ChannelKind> = record.channels.keys().copied().collect();
    let mut out = record.clone();
    for k in kinds {
        out = inject_missingness_on(&out, k, fraction, pattern)?;
    }
    Ok(out)
}

/// Marks `round(fraction·packets)` packets of one channel lost: the loss
/// flag is set, the payload dropped and sequence numbers kept so the gap is
/// visible downstream.
pub fn inject_missingness_on(
    record: &SessionRecord,
    channel: ChannelKind,
    fraction: f64,
    pattern: MissingPattern,
) -> Result<SessionRecord> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid("fraction", "must lie in [0, 1)"));
    }
    let mut out = record.clone();
    let stream = out.channels.get_mut(&channel).ok_or(Error::MissingChannel(channel))?;
    let total = stream.packets.len();
    let lose = libm::round(fraction * total as f64) as usize;
    if lose == 0 {
        return Ok(out);
    }
    let mut rng = Stream::new(key_seed(record, channel));
    let chosen: Vec<usize> = match pattern {
        MissingPattern::Burst => {
            let start = rng.below(total - lose + 1);
            (start..start + lose).collect()
        }
        MissingPattern::Random => {
            let mut idx: Vec<usize> = (0..total).collect();
            rng.shuffle(&mut idx);
            idx.truncate(lose);
            idx
        }
    };
    for i in chosen {
        let p = &mut stream.packets[i];
        p.loss_flag = true;
        p.payload.clear();
    }
    out.qc = None;
    out.outcomes = None;
    Ok(out)
}
