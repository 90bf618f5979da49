//! Resampling, band-pass filtering, nap trimming, epoching and amplitude
//! based artifact rejection.

pub mod filter;
mod resample;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Condition, Epoch, EpochSet, Recording, Session, Task};

pub use resample::{resample, ResampleOptions};

/// Band-pass parameters. `order` applies to each of the high-pass and
/// low-pass halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_hz: 0.5,
            high_hz: 50.0,
            order: 4,
            zero_phase: true,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::invalid(format!(
                "band edges must satisfy 0 < low < high, got {}..{}",
                self.low_hz, self.high_hz
            )));
        }
        if self.high_hz >= fs / 2.0 {
            return Err(Error::invalid(format!(
                "upper band edge {} Hz is at or above Nyquist ({} Hz)",
                self.high_hz,
                fs / 2.0
            )));
        }
        if self.order == 0 {
            return Err(Error::invalid("filter order must be positive"));
        }
        Ok(())
    }

    pub fn sections(&self, fs: f64) -> Vec<filter::Sos> {
        let mut sos = filter::butterworth(filter::Kind::Highpass, self.order, self.low_hz, fs);
        sos.extend(filter::butterworth(filter::Kind::Lowpass, self.order, self.high_hz, fs));
        sos
    }
}

/// Band-pass filters every channel. Zero-phase mode runs the cascade forward
/// and backward, so the output has no group delay and the same length.
pub fn bandpass(rec: Recording, spec: &FilterSpec) -> Result<Recording> {
    spec.validate(rec.fs())?;
    let sos = spec.sections(rec.fs());
    let (channels, fs, mut data, offset) = rec.into_parts();
    data.par_iter_mut().for_each(|row| {
        if spec.zero_phase {
            *row = filter::sosfiltfilt(&sos, row);
        } else {
            filter::sosfilt(&sos, row);
        }
    });
    Recording::new(channels, fs, data, offset)
}

/// Removes the first and last `trim_s` seconds of a nap recording.
pub fn trim_nap(rec: Recording, trim_s: f64) -> Result<Recording> {
    if trim_s < 0.0 {
        return Err(Error::invalid("trim duration must be non-negative"));
    }
    let n_trim = (trim_s * rec.fs()).round() as usize;
    if rec.n_samples() <= 2 * n_trim {
        return Err(Error::TooShortToTrim {
            duration_s: rec.duration_s(),
            needed_s: 2.0 * trim_s,
        });
    }
    let (channels, fs, mut data, offset) = rec.into_parts();
    for row in &mut data {
        let keep = row.len() - n_trim;
        row.truncate(keep);
        row.drain(..n_trim);
    }
    Recording::new(channels, fs, data, offset + n_trim as f64 / fs)
}

fn samples_for(duration_s: f64, fs: f64) -> Result<usize> {
    let exact = duration_s * fs;
    let n = exact.round();
    if (exact - n).abs() > 1e-6 || n < 1.0 {
        return Err(Error::invalid(format!(
            "{duration_s} s at {fs} Hz is not a whole number of samples"
        )));
    }
    Ok(n as usize)
}

/// Consecutive non-overlapping nap epochs; a trailing partial epoch is dropped.
pub fn segment_fixed(rec: &Recording, epoch_s: f64) -> Result<EpochSet> {
    let len = samples_for(epoch_s, rec.fs())?;
    if len > rec.n_samples() {
        return Err(Error::invalid(format!(
            "epoch of {epoch_s} s is longer than the recording ({} s)",
            rec.duration_s()
        )));
    }
    let n_epochs = rec.n_samples() / len;
    let epochs = (0..n_epochs)
        .map(|k| Epoch {
            data: rec
                .data()
                .iter()
                .map(|row| row[k * len..(k + 1) * len].to_vec())
                .collect(),
            condition: Condition::Nap,
            session: Session::Nap,
            rejected: false,
            index: k,
            onset_s: (k * len) as f64 / rec.fs(),
        })
        .collect();
    Ok(EpochSet {
        channels: rec.channels().to_vec(),
        fs: rec.fs(),
        epochs,
    })
}

/// Event-locked analysis window relative to stimulus onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallWindowSpec {
    pub task: Task,
    pub t_start_ms: f64,
    pub t_end_ms: f64,
}

impl RecallWindowSpec {
    pub fn new(task: Task, t_start_ms: f64, t_end_ms: f64) -> Result<Self> {
        if !(t_start_ms < t_end_ms) {
            return Err(Error::invalid(format!(
                "recall window start {t_start_ms} ms must precede end {t_end_ms} ms"
            )));
        }
        Ok(Self {
            task,
            t_start_ms,
            t_end_ms,
        })
    }

    /// Word pairs 400–800 ms; picture and location 200–400 ms.
    pub fn default_for(task: Task) -> Self {
        let (t_start_ms, t_end_ms) = match task {
            Task::WordPairs => (400.0, 800.0),
            Task::Picture | Task::Location => (200.0, 400.0),
        };
        Self {
            task,
            t_start_ms,
            t_end_ms,
        }
    }
}

/// An onset that could not be epoched.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFailure {
    pub event_index: usize,
    pub onset_s: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventEpochs {
    pub epochs: EpochSet,
    pub failures: Vec<EventFailure>,
}

/// One epoch per onset covering `[onset + t_start, onset + t_end)`. Onsets
/// whose window leaves the recording are reported, the rest proceed.
pub fn segment_events(
    rec: &Recording,
    onsets_s: &[f64],
    window: &RecallWindowSpec,
    session: Session,
) -> Result<EventEpochs> {
    let fs = rec.fs();
    let len = ((window.t_end_ms - window.t_start_ms) * fs / 1000.0).round() as usize;
    if len == 0 {
        return Err(Error::invalid("recall window shorter than one sample"));
    }
    let mut epochs = Vec::with_capacity(onsets_s.len());
    let mut failures = Vec::new();
    for (i, &onset) in onsets_s.iter().enumerate() {
        let start = ((onset + window.t_start_ms / 1000.0) * fs).round();
        if !start.is_finite() || start < 0.0 || start as usize + len > rec.n_samples() {
            failures.push(EventFailure {
                event_index: i,
                onset_s: onset,
                reason: format!(
                    "window {}..{} ms after {onset} s leaves the {} s recording",
                    window.t_start_ms,
                    window.t_end_ms,
                    rec.duration_s()
                ),
            });
            continue;
        }
        let start = start as usize;
        epochs.push(Epoch {
            data: rec.data().iter().map(|row| row[start..start + len].to_vec()).collect(),
            condition: window.task.condition(),
            session,
            rejected: false,
            index: epochs.len(),
            onset_s: onset,
        });
    }
    Ok(EventEpochs {
        epochs: EpochSet {
            channels: rec.channels().to_vec(),
            fs,
            epochs,
        },
        failures,
    })
}

/// Flags (never removes) every epoch containing a sample with
/// `|value| > threshold_uv` on any channel.
pub fn reject_amplitude(mut epochs: EpochSet, threshold_uv: f64) -> Result<EpochSet> {
    if !(threshold_uv > 0.0) {
        return Err(Error::invalid("rejection threshold must be positive"));
    }
    epochs.epochs.par_iter_mut().for_each(|e| {
        e.rejected = e
            .data
            .iter()
            .any(|row| row.iter().any(|v| v.abs() > threshold_uv));
    });
    Ok(epochs)
}
