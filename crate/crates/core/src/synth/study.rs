use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gen_recording, quantize, Montage, Oscillation, PairLag, SynthSpec};
use crate::error::{Error, Result};
use crate::model::io::{save_recording, write_events, write_responses, EventRecord, ResponseRecord};
use crate::model::{default_bands, default_region_map, BandName, BandSpec, Recording, Region, Session, SubjectSession, Task};
use crate::pipeline::config::{PreprocessConfig, StatsConfig, StudyConfig, SubjectPaths};
use crate::stats::RngSpec;

/// Effects planted into a synthetic study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectSpec {
    /// Nap band power in a region correlates (in-sample exactly `r`) with a
    /// task's delayed − immediate performance.
    NapPerformance {
        band: BandName,
        region: Region,
        task: Task,
        r: f64,
        /// Across-subject standard deviation of the planted dB shift.
        #[serde(default = "three")]
        spread_db: f64,
    },
    /// Delayed-session band power in a region shifts by `delta_db` during a task.
    RecallChange {
        task: Task,
        band: BandName,
        region: Region,
        delta_db: f64,
    },
    /// Nap band power in a region correlates with the delayed − immediate
    /// change of the same band and region during a task's recall.
    NapRecallCoupling {
        band: BandName,
        region: Region,
        task: Task,
        r: f64,
        #[serde(default = "three")]
        spread_db: f64,
    },
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPerformance {
    pub immediate_mean: f64,
    pub immediate_sd: f64,
    pub gain_mean: f64,
    pub gain_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerformanceTemplate {
    pub word_pairs: TaskPerformance,
    pub picture: TaskPerformance,
    pub location: TaskPerformance,
}

impl Default for PerformanceTemplate {
    fn default() -> Self {
        Self {
            word_pairs: TaskPerformance {
                immediate_mean: 60.0,
                immediate_sd: 10.0,
                gain_mean: 6.0,
                gain_sd: 3.0,
            },
            picture: TaskPerformance {
                immediate_mean: 1.5,
                immediate_sd: 0.12,
                gain_mean: -0.05,
                gain_sd: 0.08,
            },
            location: TaskPerformance {
                immediate_mean: 0.5,
                immediate_sd: 0.12,
                gain_mean: -0.05,
                gain_sd: 0.1,
            },
        }
    }
}

impl PerformanceTemplate {
    fn get(&self, task: Task) -> TaskPerformance {
        match task {
            Task::WordPairs => self.word_pairs,
            Task::Picture => self.picture,
            Task::Location => self.location,
        }
    }
}

/// A lagged narrowband pair in every subject's nap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagTemplate {
    pub a: String,
    pub b: String,
    pub band: BandName,
    pub lag_rad: f64,
    pub amplitude_uv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NapTemplate {
    pub fs: f64,
    pub duration_s: f64,
    pub trim_s: f64,
    pub pair_lags: Vec<LagTemplate>,
}

impl Default for NapTemplate {
    fn default() -> Self {
        Self {
            fs: 500.0,
            duration_s: 150.0,
            trim_s: 30.0,
            pair_lags: vec![LagTemplate {
                a: "C3".into(),
                b: "P3".into(),
                band: BandName::Spindle,
                lag_rad: PI / 2.0,
                amplitude_uv: 4.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecallTemplate {
    pub fs: f64,
    pub word_pairs: usize,
    pub old_items: usize,
    pub new_items: usize,
    /// Onset-to-onset interval of consecutive trials.
    pub trial_s: f64,
}

impl Default for RecallTemplate {
    fn default() -> Self {
        Self {
            fs: 250.0,
            word_pairs: 108,
            old_items: 60,
            new_items: 30,
            trial_s: 1.5,
        }
    }
}

/// Parameters of a synthetic study. Every field has a default, so an empty
/// TOML document describes a small 7-subject study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyTemplate {
    pub n_subjects: usize,
    pub seed: u64,
    pub montage: Montage,
    pub noise_sigma_uv: f64,
    /// Background narrowband amplitude per band, in default band order.
    pub band_amplitude_uv: [f64; 6],
    /// Across-subject standard deviation of every (band, region) power, in dB.
    pub subject_jitter_db: f64,
    /// Probability that a nap segment carries a large transient on one channel.
    pub artifact_rate: f64,
    pub nap: NapTemplate,
    pub recall: RecallTemplate,
    pub performance: PerformanceTemplate,
    pub effects: Vec<EffectSpec>,
}

impl Default for StudyTemplate {
    fn default() -> Self {
        Self {
            n_subjects: 7,
            seed: 1,
            montage: Montage::TenTwenty,
            noise_sigma_uv: 4.0,
            band_amplitude_uv: [12.0, 8.0, 8.0, 6.0, 4.0, 3.0],
            subject_jitter_db: 1.0,
            artifact_rate: 0.0,
            nap: NapTemplate::default(),
            recall: RecallTemplate::default(),
            performance: PerformanceTemplate::default(),
            effects: vec![
                EffectSpec::NapPerformance {
                    band: BandName::Spindle,
                    region: Region::Central,
                    task: Task::Location,
                    r: 0.85,
                    spread_db: 3.0,
                },
                EffectSpec::RecallChange {
                    task: Task::WordPairs,
                    band: BandName::Spindle,
                    region: Region::Temporal,
                    delta_db: -6.0,
                },
                EffectSpec::NapRecallCoupling {
                    band: BandName::Gamma,
                    region: Region::Frontal,
                    task: Task::WordPairs,
                    r: 0.8,
                    spread_db: 3.0,
                },
            ],
        }
    }
}

impl StudyTemplate {
    pub fn from_toml(text: &str) -> Result<Self> {
        let t: StudyTemplate = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Config("n_subjects must be positive".into()));
        }
        if self.nap.duration_s <= 2.0 * self.nap.trim_s {
            return Err(Error::Config("nap duration must exceed twice the trim".into()));
        }
        if self.recall.word_pairs == 0 || self.recall.old_items == 0 || self.recall.new_items == 0 {
            return Err(Error::Config("recall item counts must be positive".into()));
        }
        if !(self.recall.trial_s >= 1.0) {
            return Err(Error::Config("trial_s must be at least 1 s to hold the recall windows".into()));
        }
        if !(0.0..=1.0).contains(&self.artifact_rate) {
            return Err(Error::Config("artifact_rate must lie in [0, 1]".into()));
        }
        let mut tasks_with_perf = Vec::new();
        let mut nap_cells = Vec::new();
        for e in &self.effects {
            if let EffectSpec::NapPerformance { r, task, band, region, .. }
            | EffectSpec::NapRecallCoupling { r, task, band, region, .. } = e
            {
                if nap_cells.contains(&(*band, *region)) {
                    return Err(Error::Config(format!("two effects plant nap {band} {region}")));
                }
                nap_cells.push((*band, *region));
                if !(r.abs() < 1.0) {
                    return Err(Error::Config(format!("infeasible effect: |r| = {} must be below 1", r.abs())));
                }
                if self.n_subjects < 3 {
                    return Err(Error::Config("correlational effects need at least 3 subjects".into()));
                }
                if matches!(e, EffectSpec::NapPerformance { .. }) {
                    if tasks_with_perf.contains(task) {
                        return Err(Error::Config(format!("more than one nap_performance effect for {task}")));
                    }
                    tasks_with_perf.push(*task);
                }
            }
        }
        Ok(())
    }
}

/// Planted quantities for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub id: String,
    /// Planted performance per task: (immediate, delayed) target scores.
    pub scores: BTreeMap<String, (f64, f64)>,
    /// Nap dB offsets per `band/region` (jitter plus planted effects).
    pub nap_db: BTreeMap<String, f64>,
    /// Recall dB offsets per `session/task/band/region` (only non-zero cells).
    pub recall_db: BTreeMap<String, f64>,
    /// Standardized latent per effect index.
    pub latents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub subjects: Vec<SubjectTruth>,
}

fn subject_id(i: usize) -> String {
    format!("S{:02}", i + 1)
}

fn cell(band: BandName, region: Region) -> String {
    format!("{band}/{}", region.as_str())
}

fn recall_cell(session: Session, task: Task, band: BandName, region: Region) -> String {
    format!("{session}/{task}/{band}/{}", region.as_str())
}

fn normals<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Centres and scales to unit (population) variance.
fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - m) / sd } else { 0.0 };
    }
}

/// A standardized vector whose sample correlation with standardized `z` is exactly `r`.
fn correlated(z: &[f64], r: f64, mut e: Vec<f64>) -> Vec<f64> {
    standardize(&mut e);
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let ez: f64 = e.iter().zip(z).map(|(a, b)| a * b).sum();
    for (x, zi) in e.iter_mut().zip(z) {
        *x -= ez / zz * zi;
    }
    standardize(&mut e);
    z.iter().zip(&e).map(|(zi, ei)| r * zi + (1.0 - r * r).sqrt() * ei).collect()
}

fn clamp_score(task: Task, v: f64, word_pairs: usize) -> f64 {
    match task {
        Task::WordPairs => v.round().clamp(0.0, word_pairs as f64),
        Task::Picture => v.clamp(0.0, 2.0),
        Task::Location => v.clamp(-1.0, 1.0),
    }
}

/// Draws every subject-level quantity. Correlational effects are planted
/// across the whole sample, so this runs before any subject is generated.
pub fn plan_study(t: &StudyTemplate) -> Result<GroundTruth> {
    t.validate()?;
    let n = t.n_subjects;
    let streams = RngSpec::new(t.seed);
    let mut truths: Vec<SubjectTruth> = (0..n)
        .map(|i| SubjectTruth {
            id: subject_id(i),
            scores: BTreeMap::new(),
            nap_db: BTreeMap::new(),
            recall_db: BTreeMap::new(),
            latents: Vec::new(),
        })
        .collect();

    let mut jitter = streams.stream("plan/jitter");
    for truth in &mut truths {
        for b in BandName::ALL {
            for r in Region::ALL {
                let j: f64 = StandardNormal.sample(&mut jitter);
                truth.nap_db.insert(cell(b, r), t.subject_jitter_db * j);
            }
        }
    }

    let mut gains: BTreeMap<Task, Vec<f64>> = BTreeMap::new();
    for (k, e) in t.effects.iter().enumerate() {
        let mut rng = streams.stream(&format!("plan/effect/{k}"));
        match *e {
            EffectSpec::NapPerformance { band, region, task, r, spread_db } => {
                let mut z = normals(n, &mut rng);
                standardize(&mut z);
                let g = correlated(&z, r, normals(n, &mut rng));
                let perf = t.performance.get(task);
                gains.insert(task, g.iter().map(|v| perf.gain_mean + perf.gain_sd * v).collect());
                for (i, truth) in truths.iter_mut().enumerate() {
                    truth.nap_db.insert(cell(band, region), spread_db * z[i]);
                    truth.latents.push(z[i]);
                }
            }
            EffectSpec::RecallChange { task, band, region, delta_db } => {
                for truth in &mut truths {
                    *truth
                        .recall_db
                        .entry(recall_cell(Session::Delayed, task, band, region))
                        .or_default() += delta_db;
                    truth.latents.push(0.0);
                }
            }
            EffectSpec::NapRecallCoupling { band, region, task, r, spread_db } => {
                let mut w = normals(n, &mut rng);
                standardize(&mut w);
                let c = correlated(&w, r, normals(n, &mut rng));
                for (i, truth) in truths.iter_mut().enumerate() {
                    truth.nap_db.insert(cell(band, region), spread_db * w[i]);
                    *truth
                        .recall_db
                        .entry(recall_cell(Session::Delayed, task, band, region))
                        .or_default() += spread_db * c[i];
                    truth.latents.push(w[i]);
                }
            }
        }
    }

    let mut perf_rng = streams.stream("plan/performance");
    for task in Task::ALL {
        let perf = t.performance.get(task);
        let imm: Vec<f64> = normals(n, &mut perf_rng)
            .into_iter()
            .map(|v| perf.immediate_mean + perf.immediate_sd * v)
            .collect();
        let fresh: Vec<f64> = normals(n, &mut perf_rng)
            .into_iter()
            .map(|v| perf.gain_mean + perf.gain_sd * v)
            .collect();
        let gain = gains.remove(&task).unwrap_or(fresh);
        for (i, truth) in truths.iter_mut().enumerate() {
            let a = clamp_score(task, imm[i], t.recall.word_pairs);
            let b = clamp_score(task, imm[i] + gain[i], t.recall.word_pairs);
            truth.scores.insert(task.as_str().to_string(), (a, b));
        }
    }
    Ok(GroundTruth {
        seed: t.seed,
        subjects: truths,
    })
}

const SYLLABLES: [&str; 16] = [
    "ba", "ko", "mi", "tu", "re", "sa", "lo", "ne", "di", "pa", "vu", "ge", "fo", "ri", "ha", "zel",
];

/// Distinct pseudo-words, identical for every subject of a study.
fn word_list(n: usize, seed: u64, tag: &str) -> Vec<String> {
    let mut rng = RngSpec::new(seed).stream(tag);
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let w: String = (0..3).map(|_| *SYLLABLES.choose(&mut rng).expect("non-empty")).collect();
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

fn typo<R: Rng>(word: &str, rng: &mut R) -> String {
    let mut c: Vec<char> = word.chars().collect();
    let i = rng.gen_range(0..c.len() - 1);
    if rng.gen_bool(0.5) {
        c.swap(i, i + 1);
    } else {
        c.insert(i, c[i]);
    }
    c.into_iter().collect()
}

struct SessionLog {
    events: Vec<EventRecord>,
    responses: Vec<ResponseRecord>,
    /// Block windows in seconds for word pairs, picture and location.
    blocks: [(f64, f64); 3],
    duration_s: f64,
}

/// Responses and event onsets realizing the planted scores of one session.
fn session_log<R: Rng>(
    t: &StudyTemplate,
    session: Session,
    scores: &BTreeMap<String, (f64, f64)>,
    cues: &[String],
    targets: &[String],
    rng: &mut R,
) -> SessionLog {
    let pick = |task: Task| {
        let (a, b) = scores[task.as_str()];
        if session == Session::Immediate {
            a
        } else {
            b
        }
    };
    let rc = &t.recall;
    let mut events = Vec::new();
    let mut responses = Vec::new();
    let mut clock = 1.0;

    // word pairs
    let n_wp = rc.word_pairs;
    let n_correct = (pick(Task::WordPairs).round() as usize).min(n_wp);
    let mut order: Vec<usize> = (0..n_wp).collect();
    order.shuffle(rng);
    let mut correct = vec![false; n_wp];
    for &i in order.iter().take(n_correct) {
        correct[i] = true;
    }
    order.shuffle(rng);
    let wp_start = clock;
    for &i in &order {
        events.push(EventRecord {
            task: Task::WordPairs,
            session,
            onset_s: clock,
            stimulus_id: cues[i].clone(),
        });
        clock += rc.trial_s;
        let response = if correct[i] {
            if rng.gen_bool(0.2) {
                typo(&targets[i], rng)
            } else {
                targets[i].clone()
            }
        } else if rng.gen_bool(0.5) {
            String::new()
        } else {
            format!("{}x{}", &targets[(i + 1) % n_wp], targets[i].chars().rev().collect::<String>())
        };
        responses.push(ResponseRecord {
            task: Task::WordPairs,
            session,
            stimulus_id: cues[i].clone(),
            truth: targets[i].clone(),
            response,
            quadrant_truth: None,
            quadrant_answer: None,
        });
    }
    let wp_block = (wp_start, clock);

    // picture recognition: hits/n_old + correct rejections/n_new = score
    let (n_old, n_new) = (rc.old_items, rc.new_items);
    let s = pick(Task::Picture);
    let hits = ((s / 2.0 * n_old as f64).round() as usize).min(n_old);
    let cr = (((s - hits as f64 / n_old as f64) * n_new as f64).round().max(0.0) as usize).min(n_new);
    // location: (correct − false) / hits
    let k = (pick(Task::Location) * hits as f64).round() as i64;
    let h = hits as i64;
    let false_loc = ((h - k) / 4).max(-k).max(0).min((h - k) / 2).max(0);
    let correct_loc = (k + false_loc).clamp(0, h);

    let mut items: Vec<(usize, bool)> = (0..n_old).map(|i| (i, true)).chain((0..n_new).map(|i| (i, false))).collect();
    items.shuffle(rng);
    let mut old_rank: Vec<usize> = (0..n_old).collect();
    old_rank.shuffle(rng);
    let mut new_rank: Vec<usize> = (0..n_new).collect();
    new_rank.shuffle(rng);

    let pic_start = clock;
    let mut located = Vec::new();
    for &(i, is_old) in &items {
        let id = if is_old { format!("old{i:03}") } else { format!("new{i:03}") };
        events.push(EventRecord {
            task: Task::Picture,
            session,
            onset_s: clock,
            stimulus_id: id.clone(),
        });
        clock += rc.trial_s;
        let (answered_old, q_truth, q_answer) = if is_old {
            let rank = old_rank[i];
            let hit = rank < hits;
            let truth_q = (i % 4) as u8 + 1;
            let answer = if !hit {
                None
            } else if (rank as i64) < correct_loc {
                Some(truth_q)
            } else if (rank as i64) < correct_loc + false_loc {
                Some(truth_q % 4 + 1)
            } else {
                None
            };
            (hit, Some(truth_q), answer)
        } else {
            (new_rank[i] >= cr, None, None)
        };
        let row = ResponseRecord {
            task: Task::Picture,
            session,
            stimulus_id: id,
            truth: if is_old { "old" } else { "new" }.into(),
            response: if answered_old { "old" } else { "new" }.into(),
            quadrant_truth: q_truth,
            quadrant_answer: q_answer,
        };
        if answered_old {
            located.push(row.clone());
        }
        responses.push(row);
    }
    let pic_block = (pic_start, clock);

    let loc_start = clock;
    for mut row in located {
        events.push(EventRecord {
            task: Task::Location,
            session,
            onset_s: clock,
            stimulus_id: row.stimulus_id.clone(),
        });
        clock += rc.trial_s;
        row.task = Task::Location;
        responses.push(row);
    }
    let loc_block = (loc_start, clock);

    SessionLog {
        events,
        responses,
        blocks: [wp_block, pic_block, loc_block],
        duration_s: clock + 1.0,
    }
}

fn band_oscillation(band: &BandSpec, segment_s: f64) -> (f64, f64) {
    let step = 1.0 / segment_s;
    let lo = (band.f1 / step).ceil() * step;
    let hi = band.f2 - step;
    ((lo + hi) / 2.0, (hi - lo).max(0.0))
}

fn gen_subject(t: &StudyTemplate, truth: &SubjectTruth, index: usize) -> Result<SubjectSession> {
    let channels = t.montage.channels();
    let map = default_region_map(&channels);
    let regions = map.regions_for(&channels);
    let bands = default_bands();
    let seed = RngSpec::new(t.seed).stream(&format!("subject/{index}")).gen::<u64>();

    // nap
    let mut nap = SynthSpec::new(t.nap.fs, t.nap.duration_s, channels.clone(), seed);
    nap.noise_sigma_uv = t.noise_sigma_uv;
    nap.segment_s = 3.0;
    for (b, band) in bands.iter().enumerate() {
        let (center, bw) = band_oscillation(band, nap.segment_s);
        for (ch, region) in regions.iter().enumerate() {
            let db = region.map_or(0.0, |r| truth.nap_db[&cell(band.name, r)]);
            nap.oscillations.push(Oscillation {
                center_hz: center,
                bandwidth_hz: bw,
                amplitude_uv: t.band_amplitude_uv[b] * 10f64.powf(db / 20.0),
                channels: vec![ch],
                window_s: None,
            });
        }
    }
    for lag in &t.nap.pair_lags {
        let find = |l: &str| {
            channels
                .iter()
                .position(|c| c.eq_ignore_ascii_case(l))
                .ok_or_else(|| Error::Config(format!("pair-lag channel {l} not in montage")))
        };
        let band = bands.iter().find(|b| b.name == lag.band).expect("default bands cover all names");
        let (center, bw) = band_oscillation(band, nap.segment_s);
        nap.pair_lags.push(PairLag {
            i: find(&lag.a)?,
            j: find(&lag.b)?,
            lag_rad: lag.lag_rad,
            carrier_hz: center,
            amplitude_uv: lag.amplitude_uv,
            bandwidth_hz: bw,
        });
    }
    let nap_rec = add_artifacts(gen_recording(&nap)?, t.artifact_rate, seed)?;

    // recall sessions
    let cues = word_list(t.recall.word_pairs, t.seed, "words/cue");
    let targets = word_list(t.recall.word_pairs, t.seed, "words/target");
    let mut log_rng = RngSpec::new(seed).stream("responses");
    let mut events = Vec::new();
    let mut responses = Vec::new();
    let mut recall = Vec::new();
    for (s, session) in [Session::Immediate, Session::Delayed].into_iter().enumerate() {
        let log = session_log(t, session, &truth.scores, &cues, &targets, &mut log_rng);
        let mut spec = SynthSpec::new(t.recall.fs, log.duration_s, channels.clone(), seed.wrapping_add(s as u64 + 1));
        spec.noise_sigma_uv = t.noise_sigma_uv;
        spec.segment_s = t.recall.trial_s;
        for (b, band) in bands.iter().enumerate() {
            let (center, bw) = band_oscillation(band, spec.segment_s);
            for (task, window) in Task::ALL.into_iter().zip(log.blocks) {
                for (ch, region) in regions.iter().enumerate() {
                    let db = region
                        .and_then(|r| truth.recall_db.get(&recall_cell(session, task, band.name, r)))
                        .copied()
                        .unwrap_or(0.0);
                    spec.oscillations.push(Oscillation {
                        center_hz: center,
                        bandwidth_hz: bw,
                        amplitude_uv: t.band_amplitude_uv[b] * 10f64.powf(db / 20.0),
                        channels: vec![ch],
                        window_s: Some(window),
                    });
                }
            }
        }
        recall.push((session, gen_recording(&spec)?));
        events.extend(log.events);
        responses.extend(log.responses);
    }

    let mut q = RngSpec::new(seed).stream("questionnaires");
    let questionnaires = vec![
        ("psqi".to_string(), q.gen_range(2..8) as f64),
        ("sss_pre".to_string(), q.gen_range(2..5) as f64),
        ("sss_post".to_string(), q.gen_range(1..4) as f64),
    ];
    let session = SubjectSession {
        subject_id: truth.id.clone(),
        nap: nap_rec,
        recall,
        events,
        responses,
        questionnaires,
    };
    session.validate()?;
    Ok(session)
}

/// Adds a 250 µV, 100 ms transient to one random channel in a fraction of 3 s segments.
fn add_artifacts(rec: Recording, rate: f64, seed: u64) -> Result<Recording> {
    if rate <= 0.0 {
        return Ok(rec);
    }
    let (channels, fs, mut data, offset) = rec.into_parts();
    let mut rng = RngSpec::new(seed).stream("artifacts");
    let seg = (3.0 * fs).round() as usize;
    let width = (0.1 * fs).round().max(1.0) as usize;
    let n = data.first().map_or(0, Vec::len);
    for start in (0..n).step_by(seg) {
        if rng.gen_bool(rate) {
            let ch = rng.gen_range(0..data.len());
            let at = start + seg / 2;
            for v in data[ch].iter_mut().skip(at).take(width) {
                *v += 250.0;
            }
        }
    }
    Recording::new(channels, fs, data, offset)
}

/// Generates every subject in memory, with the planted ground truth.
pub fn gen_study(t: &StudyTemplate) -> Result<(Vec<SubjectSession>, GroundTruth)> {
    let truth = plan_study(t)?;
    let subjects = truth
        .subjects
        .par_iter()
        .enumerate()
        .map(|(i, s)| gen_subject(t, s, i))
        .collect::<Result<Vec<_>>>()?;
    Ok((subjects, truth))
}

/// Writes the study under `dir` (one directory per subject, `study.toml`,
/// `truth.json`) and returns the path of the study config.
///
/// Samples are rounded to 0.001 µV before writing.
pub fn write_study(t: &StudyTemplate, dir: &Path) -> Result<PathBuf> {
    let truth = plan_study(t)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = truth
        .subjects
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<SubjectPaths> {
            let session = gen_subject(t, s, i)?;
            write_subject(dir, session)
        })
        .collect::<Result<Vec<_>>>()?;

    let config = StudyConfig {
        output_dir: PathBuf::from("results"),
        preprocess: PreprocessConfig {
            trim_s: t.nap.trim_s,
            ..PreprocessConfig::default()
        },
        bands: default_bands(),
        regions: Default::default(),
        stats: StatsConfig {
            seed: t.seed,
            ..StatsConfig::default()
        },
        subjects: paths,
    };
    let cfg_path = dir.join("study.toml");
    fs::write(&cfg_path, config.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    let truth_path = dir.join("truth.json");
    fs::write(&truth_path, serde_json::to_string_pretty(&truth)?).map_err(|e| Error::io(&truth_path, e))?;
    Ok(cfg_path)
}

fn write_subject(dir: &Path, s: SubjectSession) -> Result<SubjectPaths> {
    let sub = dir.join(&s.subject_id);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let id = s.subject_id.clone();
    let rel = |name: &str| PathBuf::from(&id).join(name);
    let nap = quantize(s.nap, 1e-3)?;
    save_recording(&nap, &sub.join("nap.csv"), &sub.join("nap.meta.toml"), Some(&id))?;
    drop(nap);
    for (session, rec) in s.recall {
        let rec = quantize(rec, 1e-3)?;
        let name = format!("recall_{session}");
        save_recording(
            &rec,
            &sub.join(format!("{name}.csv")),
            &sub.join(format!("{name}.meta.toml")),
            Some(&id),
        )?;
    }
    write_events(&sub.join("events.csv"), &s.events)?;
    write_responses(&sub.join("responses.csv"), &s.responses)?;
    let mut q = csv::Writer::from_path(sub.join("questionnaires.csv"))?;
    q.write_record(["name", "value"])?;
    for (k, v) in &s.questionnaires {
        q.write_record([k.as_str(), &v.to_string()])?;
    }
    q.flush().map_err(|e| Error::io(&sub, e))?;
    Ok(SubjectPaths {
        id: id.clone(),
        nap: rel("nap.csv"),
        nap_meta: None,
        recall_immediate: rel("recall_immediate.csv"),
        recall_immediate_meta: None,
        recall_delayed: rel("recall_delayed.csv"),
        recall_delayed_meta: None,
        events: rel("events.csv"),
        responses: rel("responses.csv"),
        adjudications: None,
    })
}
