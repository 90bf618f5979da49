use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{StudyConfig, SubjectPaths};
use crate::behavior::{is_successful, score_session};
use crate::connectivity::{check_montage_for_wpli, cross_spectrum_upto, region_wpli_table, wpli_bands, WpliMatrix};
use crate::error::{Error, Result};
use crate::model::io::{
    load_recording, read_adjudications, read_events, read_responses, AdjudicationRecord, ResponseRecord,
};
use crate::model::{BandRegionTable, EpochSet, Metric, Recording, RegionMap, Session, Task};
use crate::preproc::{bandpass, reject_amplitude, resample, segment_events, segment_fixed, trim_nap};
use crate::spectral::{aggregate_regions, channel_band_power, ChannelBandPower};

/// Spectral and connectivity features of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFeatures {
    pub psd: BandRegionTable,
    pub wpli: BandRegionTable,
    pub channel_psd: ChannelBandPower,
    pub n_epochs: usize,
    pub n_rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFeatures {
    pub id: String,
    pub channels: Vec<String>,
    pub nap: ConditionFeatures,
    /// `None` when no epoch of the condition survived.
    pub recall: BTreeMap<(Session, Task), Option<ConditionFeatures>>,
    /// `None` when a score is undefined (e.g. location with no recognized item).
    pub scores: BTreeMap<(Session, Task), Option<f64>>,
    pub warnings: Vec<String>,
}

impl SubjectFeatures {
    pub fn score_diff(&self, task: Task) -> Option<f64> {
        let imm = self.scores.get(&(Session::Immediate, task)).copied().flatten()?;
        let del = self.scores.get(&(Session::Delayed, task)).copied().flatten()?;
        Some(del - imm)
    }

    pub fn recall_features(&self, session: Session, task: Task) -> Option<&ConditionFeatures> {
        self.recall.get(&(session, task)).and_then(Option::as_ref)
    }
}

/// Loads, resamples and band-pass filters one recording.
pub fn load_preprocessed(cfg: &StudyConfig, data: &std::path::Path, meta: &std::path::Path) -> Result<Recording> {
    let p = &cfg.preprocess;
    let rec = load_recording(data, meta)?;
    let rec = resample(rec, p.target_fs, &p.resample_options())?;
    bandpass(rec, &p.filter())
}

fn check_rejection(cfg: &StudyConfig, set: &EpochSet, condition: String) -> Result<()> {
    let total = set.len();
    let rejected = set.n_rejected();
    if total > 0 && rejected as f64 > cfg.preprocess.max_reject_fraction * total as f64 {
        return Err(Error::ExcessiveRejection {
            condition,
            rejected,
            total,
        });
    }
    Ok(())
}

pub fn region_map(cfg: &StudyConfig, channels: &[String]) -> Result<RegionMap> {
    let map = RegionMap::with_config(channels, &cfg.regions);
    map.validate()?;
    check_montage_for_wpli(&map)?;
    Ok(map)
}

/// Trimmed, epoched and artifact-flagged nap epochs.
pub fn nap_epochs(cfg: &StudyConfig, s: &SubjectPaths) -> Result<EpochSet> {
    let rec = load_preprocessed(cfg, &s.nap, &s.nap_meta())?;
    let rec = trim_nap(rec, cfg.preprocess.trim_s)?;
    let set = reject_amplitude(segment_fixed(&rec, cfg.preprocess.epoch_s)?, cfg.preprocess.reject_uv)?;
    check_rejection(cfg, &set, format!("{} nap", s.id))?;
    Ok(set)
}

pub struct RecallEpochs {
    pub epochs: EpochSet,
    pub warnings: Vec<String>,
}

/// Event-locked epochs of one task in one recall session.
pub fn recall_epochs(
    cfg: &StudyConfig,
    s: &SubjectPaths,
    rec: &Recording,
    session: Session,
    task: Task,
    responses: &[ResponseRecord],
    adjudications: &[AdjudicationRecord],
) -> Result<RecallEpochs> {
    let events = read_events(&s.events)?;
    let mut warnings = Vec::new();
    let onsets: Vec<f64> = events
        .iter()
        .filter(|e| e.session == session && e.task == task)
        .filter(|e| {
            if !cfg.preprocess.successful_only {
                return true;
            }
            let row = responses
                .iter()
                .find(|r| r.task == task && r.session == session && r.stimulus_id == e.stimulus_id);
            match row {
                Some(r) => is_successful(task, r, adjudications),
                None => {
                    warnings.push(format!("{}: no response for {} {} {}", s.id, session, task, e.stimulus_id));
                    false
                }
            }
        })
        .map(|e| e.onset_s)
        .collect();
    let window = cfg.preprocess.windows.spec(task)?;
    let ev = segment_events(rec, &onsets, &window, session)?;
    for f in &ev.failures {
        warnings.push(format!("{} {} {}: {}", s.id, session, task, f.reason));
    }
    let set = reject_amplitude(ev.epochs, cfg.preprocess.reject_uv)?;
    check_rejection(cfg, &set, format!("{} {} {}", s.id, session, task))?;
    Ok(RecallEpochs { epochs: set, warnings })
}

pub fn max_band_hz(cfg: &StudyConfig) -> f64 {
    cfg.bands.iter().map(|b| b.f2).fold(0.0, f64::max)
}

/// Per-band wPLI matrices; `None` rows for bands without bins or when fewer
/// than two epochs survive.
pub fn wpli_matrices(cfg: &StudyConfig, set: &EpochSet) -> Result<Vec<Option<WpliMatrix>>> {
    if set.n_accepted() < 2 {
        return Ok(vec![None; cfg.bands.len()]);
    }
    let cs = cross_spectrum_upto(set, cfg.preprocess.taper, Some(max_band_hz(cfg)))?;
    wpli_bands(&cs, &cfg.bands)
}

/// PSD and wPLI tables of an epoch set; `None` without accepted epochs.
pub fn condition_features(cfg: &StudyConfig, set: &EpochSet, map: &RegionMap) -> Result<Option<ConditionFeatures>> {
    if set.n_accepted() == 0 {
        return Ok(None);
    }
    let channel_psd = channel_band_power(set, &cfg.bands, cfg.preprocess.taper, cfg.preprocess.averaging)?;
    let psd = aggregate_regions(&channel_psd, map)?;
    let wpli = if set.n_accepted() >= 2 {
        region_wpli_table(&cfg.bands, &wpli_matrices(cfg, set)?, map)?
    } else {
        BandRegionTable::new(Metric::Wpli, cfg.bands.clone())
    };
    Ok(Some(ConditionFeatures {
        psd,
        wpli,
        channel_psd,
        n_epochs: set.n_accepted(),
        n_rejected: set.n_rejected(),
    }))
}

pub struct ScoreSet {
    pub responses: Vec<ResponseRecord>,
    pub adjudications: Vec<AdjudicationRecord>,
    pub scores: BTreeMap<(Session, Task), Option<f64>>,
    pub warnings: Vec<String>,
}

/// Scores of both sessions. A session without any response rows leaves its
/// scores unset and adds a warning.
pub fn read_scores(s: &SubjectPaths) -> Result<ScoreSet> {
    let responses = read_responses(&s.responses)?;
    let adjudications = match &s.adjudications {
        Some(p) => read_adjudications(p)?,
        None => Vec::new(),
    };
    let mut scores = BTreeMap::new();
    let mut warnings = Vec::new();
    for session in [Session::Immediate, Session::Delayed] {
        if !responses.iter().any(|r| r.session == session) {
            warnings.push(format!("{}: no {session} responses", s.id));
            continue;
        }
        for (task, score) in score_session(&responses, session, &adjudications)? {
            scores.insert((session, task), score.map(|m| m.value));
        }
    }
    Ok(ScoreSet {
        responses,
        adjudications,
        scores,
        warnings,
    })
}

/// Every feature of one subject. Nap epochs are released before the recall
/// recordings are loaded.
pub fn extract_subject(cfg: &StudyConfig, s: &SubjectPaths) -> Result<SubjectFeatures> {
    let nap_set = nap_epochs(cfg, s)?;
    let channels = nap_set.channels.clone();
    let map = region_map(cfg, &channels)?;
    let nap = condition_features(cfg, &nap_set, &map)?
        .ok_or_else(|| Error::InsufficientData(format!("{}: no accepted nap epochs", s.id)))?;
    drop(nap_set);

    let ScoreSet {
        responses,
        adjudications,
        scores,
        mut warnings,
    } = read_scores(s)?;
    let mut recall = BTreeMap::new();
    for (session, data, meta) in [
        (Session::Immediate, &s.recall_immediate, s.recall_immediate_meta()),
        (Session::Delayed, &s.recall_delayed, s.recall_delayed_meta()),
    ] {
        let rec = load_preprocessed(cfg, data, &meta)?;
        let rmap = region_map(cfg, rec.channels())?;
        for task in Task::ALL {
            let ep = recall_epochs(cfg, s, &rec, session, task, &responses, &adjudications)?;
            warnings.extend(ep.warnings);
            let f = condition_features(cfg, &ep.epochs, &rmap)?;
            if f.is_none() {
                warnings.push(format!("{}: no surviving {session} {task} epochs", s.id));
            }
            recall.insert((session, task), f);
        }
    }
    Ok(SubjectFeatures {
        id: s.id.clone(),
        channels,
        nap,
        recall,
        scores,
        warnings,
    })
}

/// Features of every subject, in config order, computed in parallel.
pub fn extract_all(cfg: &StudyConfig) -> Result<Vec<SubjectFeatures>> {
    cfg.subjects.par_iter().map(|s| extract_subject(cfg, s)).collect()
}
