//! On-disk session layout.
//!
//! ```text
//! <root>/summary.csv                      one row per persisted session
//! <root>/sessions/<key>/manifest.json     subject, task, condition, QC, outcomes
//! <root>/sessions/<key>/<channel>.jsonl   one SamplePacket per line
//! ```
//!
//! Every file is produced by a deterministic serializer, so loading a
//! session and persisting it again reproduces the same bytes.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tremorlab_core::metrics::SessionOutcomes;
use tremorlab_core::session::{ChannelConfig, ChannelKind, ChannelStream, Condition, QcSummary, SamplePacket, SessionRecord};
use tremorlab_core::signalgen::TaskSpec;
use tremorlab_core::stats::SessionSummaryRow;

use crate::error::{CliError, CliResult};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SESSIONS_DIR: &str = "sessions";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub config: ChannelConfig,
    pub file: String,
    pub packets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_key: String,
    pub subject_id: String,
    pub task: TaskSpec,
    pub condition: Condition,
    pub trial: u32,
    pub impedance_ok: bool,
    pub channels: BTreeMap<ChannelKind, ChannelEntry>,
    pub qc: QcSummary,
    pub outcomes: Option<SessionOutcomes>,
}

pub fn session_dir(root: &Path, session_key: &str) -> PathBuf {
    root.join(SESSIONS_DIR).join(session_key)
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::format(path, e))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e))
}

/// Writes `items` as JSON lines.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| CliError::format(path, e))?;
        out.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| CliError::format(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(items)
}

/// Summary-table row for a QC'd record. Sessions without outcomes carry NaN.
pub fn summary_row(record: &SessionRecord) -> SessionSummaryRow {
    let qc = record.qc.as_ref();
    let o = record.outcomes.as_ref();
    SessionSummaryRow {
        subject_id: record.subject_id.clone(),
        task: record.task.task_kind,
        condition: record.condition,
        ti_median: o.map_or(f64::NAN, |o| o.ti_median),
        rom_deg: o.map_or(f64::NAN, |o| o.rom_deg),
        reps_per_min: o.map_or(f64::NAN, |o| o.reps_per_min),
        fmed_slope_hz_per_min: o.map_or(f64::NAN, |o| o.fmed_slope_hz_per_min),
        trial: record.trial,
        excluded: qc.is_some_and(|q| q.excluded),
        exclusion_reason: qc.and_then(|q| q.exclusion_reason.clone()),
    }
}

/// Appends rows to a summary CSV, writing the header when the file is new
/// or empty.
pub fn append_summary(path: &Path, rows: &[SessionSummaryRow]) -> CliResult<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_summary(path: &Path, rows: &[SessionSummaryRow]) -> CliResult<()> {
    if path.exists() {
        fs::remove_file(path).map_err(|e| CliError::io(path, e))?;
    }
    append_summary(path, rows)
}

pub fn read_summary(path: &Path) -> CliResult<Vec<SessionSummaryRow>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

/// Writes one session: a JSONL file per channel, the manifest, and a row
/// appended to `<root>/summary.csv`.
pub fn persist(record: &SessionRecord, root: &Path) -> CliResult<SessionManifest> {
    let qc = record
        .qc
        .clone()
        .ok_or_else(|| CliError::Validation(format!("session {} has no QC summary", record.session_key())))?;
    let key = record.session_key();
    let dir = session_dir(root, &key);
    create_dir(&dir)?;
    let mut channels = BTreeMap::new();
    for (&kind, stream) in &record.channels {
        let file = format!("{kind}.jsonl");
        write_jsonl(&dir.join(&file), &stream.packets)?;
        channels.insert(
            kind,
            ChannelEntry {
                config: stream.config,
                file,
                packets: stream.packets.len(),
            },
        );
    }
    let manifest = SessionManifest {
        session_key: key,
        subject_id: record.subject_id.clone(),
        task: record.task.clone(),
        condition: record.condition,
        trial: record.trial,
        impedance_ok: record.impedance_ok,
        channels,
        qc,
        outcomes: record.outcomes,
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)?;
    append_summary(&root.join(SUMMARY_CSV), &[summary_row(record)])?;
    Ok(manifest)
}

pub fn load(session_dir: &Path) -> CliResult<SessionRecord> {
    let manifest: SessionManifest = read_json(&session_dir.join(MANIFEST_JSON))?;
    let mut channels = BTreeMap::new();
    for (kind, entry) in &manifest.channels {
        let path = session_dir.join(&entry.file);
        let packets: Vec<SamplePacket> = read_jsonl(&path)?;
        if packets.len() != entry.packets {
            return Err(CliError::format(
                &path,
                format!("manifest lists {} packets, file holds {}", entry.packets, packets.len()),
            ));
        }
        channels.insert(
            *kind,
            ChannelStream {
                config: entry.config,
                packets,
            },
        );
    }
    Ok(SessionRecord {
        subject_id: manifest.subject_id,
        task: manifest.task,
        condition: manifest.condition,
        trial: manifest.trial,
        channels,
        impedance_ok: manifest.impedance_ok,
        qc: Some(manifest.qc),
        outcomes: manifest.outcomes,
    })
}

/// Session directories under `root`, sorted by name.
pub fn list_sessions(root: &Path) -> CliResult<Vec<PathBuf>> {
    let dir = root.join(SESSIONS_DIR);
    let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(&dir, e))?;
        if entry.path().join(MANIFEST_JSON).is_file() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}
