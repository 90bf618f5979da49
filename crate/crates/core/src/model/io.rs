//! CSV and metadata-sidecar ingestion and serialization.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Recording, Session, Task};
use crate::error::{Error, Result};

/// Key/value sidecar describing a recording CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub fs: f64,
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default)]
    pub start_offset_s: f64,
    #[serde(default)]
    pub subject_id: Option<String>,
    pub channels: Vec<String>,
}

fn default_units() -> String {
    "uV".to_string()
}

impl RecordingMeta {
    pub fn for_recording(rec: &Recording, subject_id: Option<&str>) -> Self {
        Self {
            fs: rec.fs(),
            units: default_units(),
            start_offset_s: rec.start_offset_s(),
            subject_id: subject_id.map(str::to_string),
            channels: rec.channels().to_vec(),
        }
    }
}

pub fn read_meta(path: &Path) -> Result<RecordingMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: RecordingMeta =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !(meta.fs > 0.0) {
        return Err(Error::invalid(format!("{}: fs must be positive", path.display())));
    }
    if !meta.units.eq_ignore_ascii_case("uv") && meta.units != "µV" {
        return Err(Error::invalid(format!(
            "{}: unsupported units {:?}, expected uV",
            path.display(),
            meta.units
        )));
    }
    Ok(meta)
}

/// Loads a channels-as-columns CSV of µV values with its metadata sidecar.
pub fn load_recording(path: &Path, meta_path: &Path) -> Result<Recording> {
    let meta = read_meta(meta_path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::with_capacity(1 << 20, file));
    let header = rdr.headers()?.clone();
    if header.len() != meta.channels.len() {
        return Err(Error::ChannelCountMismatch {
            expected: meta.channels.len(),
            found: header.len(),
        });
    }
    for (h, m) in header.iter().zip(&meta.channels) {
        if h.trim() != m {
            return Err(Error::invalid(format!(
                "column {h:?} does not match metadata channel {m:?}"
            )));
        }
    }
    let n_ch = meta.channels.len();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); n_ch];
    let mut record = csv::StringRecord::new();
    let mut row = 1;
    while rdr.read_record(&mut record)? {
        row += 1;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if record.len() != n_ch {
            return Err(Error::ChannelCountMismatch {
                expected: n_ch,
                found: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                col: col + 1,
                value: cell.to_string(),
            })?;
            data[col].push(v);
        }
    }
    Recording::new(meta.channels, meta.fs, data, meta.start_offset_s)
}

/// Writes the recording as CSV plus metadata sidecar. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn save_recording(
    rec: &Recording,
    path: &Path,
    meta_path: &Path,
    subject_id: Option<&str>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", rec.channels().join(",")).map_err(io_err)?;
    let n_ch = rec.n_channels();
    for s in 0..rec.n_samples() {
        for c in 0..n_ch {
            if c > 0 {
                w.write_all(b",").map_err(io_err)?;
            }
            write!(w, "{}", rec.data()[c][s]).map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let meta = RecordingMeta::for_recording(rec, subject_id);
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(meta_path, text).map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}

/// One stimulus onset in a recall recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub task: Task,
    pub session: Session,
    pub onset_s: f64,
    pub stimulus_id: String,
}

/// One row of a response log.
///
/// For word pairs `truth` is the target word and `response` the typed answer.
/// For picture and location items `truth` and `response` are `old`/`new`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub task: Task,
    pub session: Session,
    pub stimulus_id: String,
    pub truth: String,
    pub response: String,
    pub quadrant_truth: Option<u8>,
    pub quadrant_answer: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

/// Manual decision for a word-pair answer, keyed by cue and typed response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub cue: String,
    pub response: String,
    pub verdict: Verdict,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    read_csv(path)
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    write_csv(path, events)
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    read_csv(path)
}

pub fn write_responses(path: &Path, rows: &[ResponseRecord]) -> Result<()> {
    write_csv(path, rows)
}

pub fn read_adjudications(path: &Path) -> Result<Vec<AdjudicationRecord>> {
    read_csv(path)
}
