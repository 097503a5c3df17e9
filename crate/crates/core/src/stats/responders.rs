use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SubjectOutcomes;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponderThresholds {
    /// Assisted TI at or below this counts as controlled tremor.
    pub ti: f64,
    /// ROM gain in degrees.
    pub rom: f64,
    /// Reps/min gain.
    pub reps: f64,
}

impl Default for ResponderThresholds {
    fn default() -> Self {
        Self { ti: 0.30, rom: 5.0, reps: 1.5 }
    }
}

/// `ti=0.30,rom=5,reps=1.5`; keys may be given in any order and omitted
/// keys keep their default.
impl FromStr for ResponderThresholds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut t = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid("thresholds", alloc::format!("expected key=value, got `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid("thresholds", alloc::format!("`{v}` is not a number")))?;
            match k.trim() {
                "ti" => t.ti = v,
                "rom" => t.rom = v,
                "reps" => t.reps = v,
                other => return Err(Error::invalid("thresholds", alloc::format!("unknown key `{other}`"))),
            }
        }
        Ok(t)
    }
}

impl fmt::Display for ResponderThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ti={},rom={},reps={}", self.ti, self.rom, self.reps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponderRow {
    pub criterion: String,
    pub threshold: f64,
    pub count: usize,
    pub n: usize,
    pub percent: f64,
}

fn row(criterion: &str, threshold: f64, count: usize, n: usize) -> ResponderRow {
    ResponderRow {
        criterion: String::from(criterion),
        threshold,
        count,
        n,
        percent: if n == 0 { 0.0 } else { 100.0 * count as f64 / n as f64 },
    }
}

/// Three responder rows: assisted TI at or below the TI threshold, ROM gain
/// of at least the ROM threshold in degrees, reps/min gain of at least the
/// reps threshold.
pub fn responder_table(subjects: &[SubjectOutcomes], thresholds: &ResponderThresholds) -> Vec<ResponderRow> {
    let n = subjects.len();
    let ti = subjects.iter().filter(|s| s.assisted.ti <= thresholds.ti).count();
    let rom = subjects
        .iter()
        .filter(|s| s.assisted.rom_deg - s.baseline.rom_deg >= thresholds.rom)
        .count();
    let reps = subjects
        .iter()
        .filter(|s| s.assisted.reps_per_min - s.baseline.reps_per_min >= thresholds.reps)
        .count();
    alloc::vec![
        row("ti_controlled", thresholds.ti, ti, n),
        row("rom_gain_deg", thresholds.rom, rom, n),
        row("reps_gain_per_min", thresholds.reps, reps, n),
    ]
}
