use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;
use crate::stats::{StatResult, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Performance,
    NapFeatureCorrelation,
    RecallPrepost,
    RecallFeatureCorrelation,
}

impl Analysis {
    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Performance => "performance",
            Analysis::NapFeatureCorrelation => "nap_feature_correlation",
            Analysis::RecallPrepost => "recall_prepost",
            Analysis::RecallFeatureCorrelation => "recall_feature_correlation",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Task,
    Region,
    Pair,
    Electrode,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Task => "task",
            Level::Region => "region",
            Level::Pair => "pair",
            Level::Electrode => "electrode",
        }
    }
}

/// One test, keyed by the full (analysis, task, metric, band, cell) tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub analysis: Analysis,
    pub task: Task,
    /// `score`, `psd_db` or `wpli`.
    pub metric: String,
    pub level: Level,
    /// Band name, empty for behavioral rows.
    pub band: String,
    /// Region, region pair or channel label; empty for behavioral rows.
    pub cell: String,
    pub test: TestKind,
    pub n: usize,
    /// Mean difference (paired tests) or r (correlations).
    pub estimate: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub p_uncorrected: Option<f64>,
    pub corrected: bool,
    pub n_comparisons: usize,
    pub significant: bool,
    /// Kruskal–Wallis across sessions (pre/post analysis only).
    pub kw_h: Option<f64>,
    pub kw_p: Option<f64>,
    pub note: String,
}

impl ReportRow {
    pub fn new(analysis: Analysis, task: Task, metric: &str, level: Level, band: &str, cell: &str, test: TestKind) -> Self {
        Self {
            analysis,
            task,
            metric: metric.into(),
            level,
            band: band.into(),
            cell: cell.into(),
            test,
            n: 0,
            estimate: None,
            statistic: None,
            p_value: None,
            p_uncorrected: None,
            corrected: false,
            n_comparisons: 1,
            significant: false,
            kw_h: None,
            kw_p: None,
            note: String::new(),
        }
    }

    pub fn set_result(&mut self, r: &StatResult, alpha: f64) {
        self.n = r.n;
        self.statistic = Some(r.statistic);
        self.p_value = Some(r.p_value);
        self.corrected = r.corrected;
        self.n_comparisons = r.n_comparisons;
        self.significant = r.p_value < alpha;
        if let Some(note) = &r.note {
            self.note = note.clone();
        }
    }

    pub fn key(&self) -> String {
        format!("{}/{}/{}/{}/{}/{}", self.analysis, self.task, self.metric, self.level.as_str(), self.band, self.cell)
    }
}

pub const ROW_HEADER: [&str; 18] = [
    "analysis",
    "task",
    "metric",
    "level",
    "band",
    "cell",
    "test",
    "n",
    "estimate",
    "statistic",
    "p_value",
    "p_uncorrected",
    "correction",
    "n_comparisons",
    "significant",
    "kw_h",
    "kw_p",
    "note",
];

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        Some(x) if x.is_nan() => "NA".into(),
        Some(x) => if x > 0.0 { "inf" } else { "-inf" }.into(),
        None => "NA".into(),
    }
}

/// Writes rows as CSV with missing values as `NA`.
pub fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.analysis.as_str().to_string(),
            r.task.as_str().to_string(),
            r.metric.clone(),
            r.level.as_str().to_string(),
            r.band.clone(),
            r.cell.clone(),
            r.test.to_string(),
            r.n.to_string(),
            fmt_opt(r.estimate),
            fmt_opt(r.statistic),
            fmt_opt(r.p_value),
            fmt_opt(r.p_uncorrected),
            if r.corrected { "bonferroni" } else { "uncorrected" }.to_string(),
            r.n_comparisons.to_string(),
            r.significant.to_string(),
            fmt_opt(r.kw_h),
            fmt_opt(r.kw_p),
            r.note.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Seed, config digest and tool version attached to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub resamples: usize,
    pub alpha: f64,
    /// The parsed configuration without its output directory.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub analysis: Analysis,
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn new(analysis: Analysis) -> Self {
        Self {
            analysis,
            rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn find(&self, task: Task, metric: &str, band: &str, cell: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.task == task && r.metric == metric && r.band == band && r.cell == cell)
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
