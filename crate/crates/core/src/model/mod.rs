//! Core domain types: continuous recordings, epochs, frequency bands, scalp
//! regions and the band × region feature tables built from them.

mod bands;
pub mod io;
mod regions;
mod table;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bands::{default_bands, BandName, BandSpec};
pub use regions::{default_region_map, Region, RegionMap, RegionMapConfig, RegionPair};
pub use table::{load_table, save_table, BandRegionTable, Metric};

/// Continuous multichannel signal in microvolts, one row per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    channels: Vec<String>,
    fs: f64,
    data: Vec<Vec<f64>>,
    start_offset_s: f64,
}

impl Recording {
    pub fn new(
        channels: Vec<String>,
        fs: f64,
        data: Vec<Vec<f64>>,
        start_offset_s: f64,
    ) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
        }
        if channels.len() != data.len() {
            return Err(Error::ChannelCountMismatch {
                expected: channels.len(),
                found: data.len(),
            });
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if !seen.insert(ch.as_str()) {
                return Err(Error::invalid(format!("duplicate channel label {ch:?}")));
            }
        }
        if let Some(first) = data.first() {
            let n = first.len();
            if let Some((i, row)) = data.iter().enumerate().find(|(_, r)| r.len() != n) {
                return Err(Error::invalid(format!(
                    "channel {} has {} samples, expected {n}",
                    channels[i],
                    row.len()
                )));
            }
        }
        Ok(Self {
            channels,
            fs,
            data,
            start_offset_s,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.data[idx]
    }

    pub fn start_offset_s(&self) -> f64 {
        self.start_offset_s
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn into_parts(self) -> (Vec<String>, f64, Vec<Vec<f64>>, f64) {
        (self.channels, self.fs, self.data, self.start_offset_s)
    }
}

/// What the subject was doing while an epoch was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Nap,
    RecallWordPairs,
    RecallPicture,
    RecallLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Session {
    Immediate,
    Delayed,
    Nap,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::Immediate => "immediate",
            Session::Delayed => "delayed",
            Session::Nap => "nap",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "immediate" => Ok(Session::Immediate),
            "delayed" => Ok(Session::Delayed),
            "nap" => Ok(Session::Nap),
            other => Err(Error::invalid(format!("unknown session {other:?}"))),
        }
    }
}

/// The three memory tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    WordPairs,
    Picture,
    Location,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::WordPairs, Task::Picture, Task::Location];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::WordPairs => "word_pairs",
            Task::Picture => "picture",
            Task::Location => "location",
        }
    }

    pub fn condition(self) -> Condition {
        match self {
            Task::WordPairs => Condition::RecallWordPairs,
            Task::Picture => Condition::RecallPicture,
            Task::Location => Condition::RecallLocation,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "word_pairs" | "wordpairs" | "wp" => Ok(Task::WordPairs),
            "picture" | "pm" => Ok(Task::Picture),
            "location" | "lm" => Ok(Task::Location),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Nap => "nap",
            Condition::RecallWordPairs => "recall_word_pairs",
            Condition::RecallPicture => "recall_picture",
            Condition::RecallLocation => "recall_location",
        })
    }
}

/// A segment of multichannel signal (channels × samples, µV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub data: Vec<Vec<f64>>,
    pub condition: Condition,
    pub session: Session,
    /// Set only by [`crate::preproc::reject_amplitude`].
    pub rejected: bool,
    pub index: usize,
    /// Start of the segment in seconds from the beginning of its recording.
    pub onset_s: f64,
}

impl Epoch {
    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

/// Epochs cut from one recording, sharing channels and sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSet {
    pub channels: Vec<String>,
    pub fs: f64,
    pub epochs: Vec<Epoch>,
}

impl EpochSet {
    pub fn accepted(&self) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(|e| !e.rejected)
    }

    pub fn n_accepted(&self) -> usize {
        self.accepted().count()
    }

    pub fn n_rejected(&self) -> usize {
        self.epochs.len() - self.n_accepted()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Samples per epoch; `None` for an empty set.
    pub fn epoch_len(&self) -> Option<usize> {
        self.epochs.first().map(Epoch::n_samples)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One subject's nap and recall material, as referenced from a study config.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSession {
    pub subject_id: String,
    pub nap: Recording,
    pub recall: Vec<(Session, Recording)>,
    pub events: Vec<io::EventRecord>,
    pub responses: Vec<io::ResponseRecord>,
    /// Questionnaire scores (PSQI, SSS pre/post, ...) kept as opaque scalars.
    pub questionnaires: Vec<(String, f64)>,
}

impl SubjectSession {
    /// Checks that every event onset falls inside its session's recording.
    pub fn validate(&self) -> Result<()> {
        for ev in &self.events {
            let Some((_, rec)) = self.recall.iter().find(|(s, _)| *s == ev.session) else {
                return Err(Error::invalid(format!(
                    "subject {}: event {} refers to missing {} recording",
                    self.subject_id, ev.stimulus_id, ev.session
                )));
            };
            if ev.onset_s < 0.0 || ev.onset_s > rec.duration_s() {
                return Err(Error::invalid(format!(
                    "subject {}: event {} at {} s lies outside the {} recording ({} s)",
                    self.subject_id,
                    ev.stimulus_id,
                    ev.onset_s,
                    ev.session,
                    rec.duration_s()
                )));
            }
        }
        Ok(())
    }
}
