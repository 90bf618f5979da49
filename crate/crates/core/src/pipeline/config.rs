use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{default_bands, BandSpec, RegionMapConfig, Task};
use crate::preproc::{FilterSpec, RecallWindowSpec, ResampleOptions};
use crate::spectral::{Averaging, Taper};

/// File locations for one subject. Relative paths resolve against the
/// directory holding the config file. A recording's metadata defaults to
/// the data path with its extension replaced by `meta.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectPaths {
    pub id: String,
    pub nap: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nap_meta: Option<PathBuf>,
    pub recall_immediate: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_immediate_meta: Option<PathBuf>,
    pub recall_delayed: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_delayed_meta: Option<PathBuf>,
    pub events: PathBuf,
    pub responses: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjudications: Option<PathBuf>,
}

pub fn meta_path_for(data: &Path) -> PathBuf {
    data.with_extension("meta.toml")
}

impl SubjectPaths {
    pub fn nap_meta(&self) -> PathBuf {
        self.nap_meta.clone().unwrap_or_else(|| meta_path_for(&self.nap))
    }

    pub fn recall_immediate_meta(&self) -> PathBuf {
        self.recall_immediate_meta
            .clone()
            .unwrap_or_else(|| meta_path_for(&self.recall_immediate))
    }

    pub fn recall_delayed_meta(&self) -> PathBuf {
        self.recall_delayed_meta
            .clone()
            .unwrap_or_else(|| meta_path_for(&self.recall_delayed))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.nap);
        join(&mut self.recall_immediate);
        join(&mut self.recall_delayed);
        join(&mut self.events);
        join(&mut self.responses);
        for p in [
            &mut self.nap_meta,
            &mut self.recall_immediate_meta,
            &mut self.recall_delayed_meta,
            &mut self.adjudications,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    fn required_files(&self) -> Vec<PathBuf> {
        let mut v = vec![
            self.nap.clone(),
            self.nap_meta(),
            self.recall_immediate.clone(),
            self.recall_immediate_meta(),
            self.recall_delayed.clone(),
            self.recall_delayed_meta(),
            self.events.clone(),
            self.responses.clone(),
        ];
        v.extend(self.adjudications.clone());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub word_pairs: [f64; 2],
    pub picture: [f64; 2],
    pub location: [f64; 2],
}

impl Default for WindowConfig {
    fn default() -> Self {
        let w = |t| {
            let s = RecallWindowSpec::default_for(t);
            [s.t_start_ms, s.t_end_ms]
        };
        Self {
            word_pairs: w(Task::WordPairs),
            picture: w(Task::Picture),
            location: w(Task::Location),
        }
    }
}

impl WindowConfig {
    pub fn spec(&self, task: Task) -> Result<RecallWindowSpec> {
        let [a, b] = match task {
            Task::WordPairs => self.word_pairs,
            Task::Picture => self.picture,
            Task::Location => self.location,
        };
        RecallWindowSpec::new(task, a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_fs: f64,
    pub allow_rational: bool,
    pub low_hz: f64,
    pub high_hz: f64,
    pub filter_order: usize,
    pub trim_s: f64,
    pub epoch_s: f64,
    pub reject_uv: f64,
    /// Hard error when a condition loses more than this fraction of its epochs.
    pub max_reject_fraction: f64,
    /// Recall epochs only for successfully recalled items.
    pub successful_only: bool,
    pub taper: Taper,
    pub averaging: Averaging,
    pub windows: WindowConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_fs: 250.0,
            allow_rational: false,
            low_hz: 0.5,
            high_hz: 50.0,
            filter_order: 4,
            trim_s: 900.0,
            epoch_s: 3.0,
            reject_uv: 100.0,
            max_reject_fraction: 0.5,
            successful_only: true,
            taper: Taper::Hann,
            averaging: Averaging::DbThenMean,
            windows: WindowConfig::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn filter(&self) -> FilterSpec {
        FilterSpec {
            low_hz: self.low_hz,
            high_hz: self.high_hz,
            order: self.filter_order,
            zero_phase: true,
        }
    }

    pub fn resample_options(&self) -> ResampleOptions {
        ResampleOptions {
            allow_rational: self.allow_rational,
            ..ResampleOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub resamples: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default = "default_bands")]
    pub bands: Vec<BandSpec>,
    #[serde(default)]
    pub regions: RegionMapConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    pub subjects: Vec<SubjectPaths>,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// A parsed config together with its source text digest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Paths resolved against `base_dir`.
    pub config: StudyConfig,
    /// As written in the file, plus command-line overrides.
    pub raw: StudyConfig,
    pub sha256: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.config.stats.seed = seed;
        self.raw.stats.seed = seed;
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.raw.output_dir = dir.clone();
        self.config.output_dir = dir;
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, validates and resolves relative paths against the config's directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let raw = config.clone();
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for s in &mut config.subjects {
            s.resolve(&base_dir);
        }
        if config.output_dir.is_relative() {
            config.output_dir = base_dir.join(&config.output_dir);
        }
        Ok(LoadedConfig {
            config,
            raw,
            sha256: hex_digest(text.as_bytes()),
            base_dir,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.stats.alpha)));
        }
        if self.stats.resamples == 0 {
            return Err(Error::Config("resamples must be positive".into()));
        }
        let p = &self.preprocess;
        if !(p.max_reject_fraction >= 0.0 && p.max_reject_fraction <= 1.0) {
            return Err(Error::Config("max_reject_fraction must lie in [0, 1]".into()));
        }
        if !(p.epoch_s > 0.0) || !(p.trim_s >= 0.0) || !(p.reject_uv > 0.0) {
            return Err(Error::Config("epoch_s and reject_uv must be positive, trim_s non-negative".into()));
        }
        p.filter().validate(p.target_fs)?;
        for t in Task::ALL {
            p.windows.spec(t)?;
        }
        if self.bands.is_empty() {
            return Err(Error::Config("no bands configured".into()));
        }
        for b in &self.bands {
            BandSpec::new(b.name, b.f1, b.f2)?;
            if b.f2 > p.target_fs / 2.0 {
                return Err(Error::Config(format!("band {} exceeds the Nyquist frequency", b.name)));
            }
        }
        let mut ids: Vec<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate subject id".into()));
        }
        Ok(())
    }

    /// Every referenced file must exist when a run starts.
    pub fn check_files(&self) -> Result<()> {
        for s in &self.subjects {
            for f in s.required_files() {
                if !f.exists() {
                    return Err(Error::MissingFile(f));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
