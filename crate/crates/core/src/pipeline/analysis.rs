use std::collections::BTreeMap;

use super::config::StudyConfig;
use super::features::SubjectFeatures;
use super::report::{Analysis, AnalysisReport, Level, ReportRow};
use crate::error::{Error, Result};
use crate::model::{BandRegionTable, Metric, Region, RegionPair, Session, Task};
use crate::stats::{kruskal_wallis, mean, pearson, perm_paired, RngSpec, TestKind};

/// Per-subject (immediate, delayed) scores keyed by task.
pub type ScoreTable = Vec<(String, BTreeMap<(Session, Task), Option<f64>>)>;

fn rng(cfg: &StudyConfig) -> RngSpec {
    RngSpec::new(cfg.stats.seed)
}

fn perm_row(cfg: &StudyConfig, row: &mut ReportRow, del: &[f64], imm: &[f64]) {
    row.n = del.len();
    if del.len() < 2 {
        row.note = "insufficient data (fewer than 2 paired subjects)".into();
        return;
    }
    let d: Vec<f64> = del.iter().zip(imm).map(|(a, b)| a - b).collect();
    row.estimate = Some(mean(&d));
    match perm_paired(del, imm, cfg.stats.resamples, &rng(cfg), &row.key()) {
        Ok(r) => {
            row.set_result(&r, cfg.stats.alpha);
            row.p_uncorrected = Some(r.p_value);
        }
        Err(e) => row.note = e.to_string(),
    }
}

fn pearson_row(cfg: &StudyConfig, row: &mut ReportRow, pairs: &[(f64, f64)]) {
    row.n = pairs.len();
    if pairs.len() < 3 {
        row.note = "undefined (fewer than 3 subjects)".into();
        return;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    match pearson(&x, &y) {
        Ok(r) => {
            row.set_result(&r, cfg.stats.alpha);
            row.estimate = Some(r.statistic);
            row.p_uncorrected = Some(r.p_value);
        }
        Err(Error::InsufficientData(_)) => row.note = "undefined (zero variance)".into(),
        Err(e) => row.note = e.to_string(),
    }
}

/// Paired delayed − immediate permutation test per task.
pub fn performance(cfg: &StudyConfig, scores: &ScoreTable) -> AnalysisReport {
    let mut report = AnalysisReport::new(Analysis::Performance);
    for task in Task::ALL {
        let mut imm = Vec::new();
        let mut del = Vec::new();
        for (id, s) in scores {
            let a = s.get(&(Session::Immediate, task)).copied().flatten();
            let b = s.get(&(Session::Delayed, task)).copied().flatten();
            match (a, b) {
                (Some(a), Some(b)) => {
                    imm.push(a);
                    del.push(b);
                }
                _ => report.warnings.push(format!("{id}: {task} score missing in a session; skipped")),
            }
        }
        let mut row = ReportRow::new(Analysis::Performance, task, "score", Level::Task, "", "", TestKind::PermPaired);
        perm_row(cfg, &mut row, &del, &imm);
        report.rows.push(row);
    }
    report
}

/// Cells of a feature table as (metric, level, column label) triples.
fn table_cells(metric: Metric) -> Vec<(Level, String)> {
    let level = match metric {
        Metric::PsdDb => Level::Region,
        Metric::Wpli => Level::Pair,
    };
    metric.columns().into_iter().map(|c| (level, c)).collect()
}

fn table<'a>(f: &'a super::features::ConditionFeatures, metric: Metric) -> &'a BandRegionTable {
    match metric {
        Metric::PsdDb => &f.psd,
        Metric::Wpli => &f.wpli,
    }
}

/// Pearson correlation of every nap PSD and wPLI cell with each task's
/// performance change. Reported uncorrected.
pub fn nap_feature_correlation(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> Result<AnalysisReport> {
    if subjects.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "nap feature correlation needs at least 3 subjects, got {}",
            subjects.len()
        )));
    }
    let mut report = AnalysisReport::new(Analysis::NapFeatureCorrelation);
    for task in Task::ALL {
        for metric in [Metric::PsdDb, Metric::Wpli] {
            for (b, band) in cfg.bands.iter().enumerate() {
                for (c, (level, cell)) in table_cells(metric).into_iter().enumerate() {
                    let pairs: Vec<(f64, f64)> = subjects
                        .iter()
                        .filter_map(|s| Some((table(&s.nap, metric).get(b, c)?, s.score_diff(task)?)))
                        .collect();
                    let mut row = ReportRow::new(
                        report.analysis,
                        task,
                        metric.as_str(),
                        level,
                        band.name.as_str(),
                        &cell,
                        TestKind::Pearson,
                    );
                    pearson_row(cfg, &mut row, &pairs);
                    report.rows.push(row);
                }
            }
        }
    }
    Ok(report)
}

/// Applies Bonferroni within one family of rows (tested rows only).
fn correct_family(rows: &mut [ReportRow], alpha: f64) {
    let m = rows.iter().filter(|r| r.p_uncorrected.is_some()).count();
    for r in rows.iter_mut() {
        if let Some(p) = r.p_uncorrected {
            let adj = (p * m as f64).min(1.0);
            r.p_value = Some(adj);
            r.corrected = true;
            r.n_comparisons = m;
            r.significant = adj < alpha;
        }
    }
}

struct Cell {
    level: Level,
    label: String,
    value: Box<dyn Fn(&super::features::ConditionFeatures) -> Option<f64>>,
}

fn cells_for(metric: Metric, band: usize, electrodes: &[String]) -> Vec<Cell> {
    let mut out: Vec<Cell> = table_cells(metric)
        .into_iter()
        .enumerate()
        .map(|(c, (level, label))| Cell {
            level,
            label,
            value: Box::new(move |f: &super::features::ConditionFeatures| table(f, metric).get(band, c)),
        })
        .collect();
    if metric == Metric::PsdDb {
        for label in electrodes {
            let l = label.clone();
            out.push(Cell {
                level: Level::Electrode,
                label: label.clone(),
                value: Box::new(move |f: &super::features::ConditionFeatures| {
                    let i = f.channel_psd.channels.iter().position(|c| *c == l)?;
                    f.channel_psd.db[band][i]
                }),
            });
        }
    }
    out
}

/// Electrode labels present in every subject's recall features, in first-subject order.
fn common_electrodes(subjects: &[SubjectFeatures]) -> Vec<String> {
    let Some(first) = subjects.first() else {
        return Vec::new();
    };
    first
        .channels
        .iter()
        .filter(|c| subjects.iter().all(|s| s.channels.contains(c)))
        .cloned()
        .collect()
}

/// Kruskal–Wallis across sessions plus a Bonferroni-corrected paired
/// permutation test per (task, metric, band, cell). Each (task, metric,
/// band, level) forms one correction family.
pub fn recall_prepost(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> AnalysisReport {
    let mut report = AnalysisReport::new(Analysis::RecallPrepost);
    let electrodes = common_electrodes(subjects);
    for task in Task::ALL {
        for metric in [Metric::PsdDb, Metric::Wpli] {
            for (b, band) in cfg.bands.iter().enumerate() {
                let mut family: Vec<ReportRow> = Vec::new();
                for cell in cells_for(metric, b, &electrodes) {
                    let mut imm = Vec::new();
                    let mut del = Vec::new();
                    for s in subjects {
                        let a = s.recall_features(Session::Immediate, task).and_then(|f| (cell.value)(f));
                        let d = s.recall_features(Session::Delayed, task).and_then(|f| (cell.value)(f));
                        if let (Some(a), Some(d)) = (a, d) {
                            imm.push(a);
                            del.push(d);
                        }
                    }
                    let mut row = ReportRow::new(
                        report.analysis,
                        task,
                        metric.as_str(),
                        cell.level,
                        band.name.as_str(),
                        &cell.label,
                        TestKind::PermPaired,
                    );
                    if imm.is_empty() {
                        row.note = "missing (no surviving epochs)".into();
                    } else {
                        if let Ok(kw) = kruskal_wallis(&[imm.clone(), del.clone()]) {
                            row.kw_h = Some(kw.statistic);
                            row.kw_p = Some(kw.p_value);
                        }
                        perm_row(cfg, &mut row, &del, &imm);
                    }
                    family.push(row);
                }
                for level in [Level::Region, Level::Pair, Level::Electrode] {
                    let mut rows: Vec<ReportRow> = family.iter().filter(|r| r.level == level).cloned().collect();
                    correct_family(&mut rows, cfg.stats.alpha);
                    report.rows.extend(rows);
                }
            }
        }
    }
    report
}

/// Pearson correlation between each nap feature and the delayed − immediate
/// change of the same feature during recall. Reported uncorrected.
pub fn recall_feature_correlation(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> AnalysisReport {
    let mut report = AnalysisReport::new(Analysis::RecallFeatureCorrelation);
    for task in Task::ALL {
        for metric in [Metric::PsdDb, Metric::Wpli] {
            for (b, band) in cfg.bands.iter().enumerate() {
                for (c, (level, cell)) in table_cells(metric).into_iter().enumerate() {
                    let pairs: Vec<(f64, f64)> = subjects
                        .iter()
                        .filter_map(|s| {
                            let x = table(&s.nap, metric).get(b, c)?;
                            let a = table(s.recall_features(Session::Immediate, task)?, metric).get(b, c)?;
                            let d = table(s.recall_features(Session::Delayed, task)?, metric).get(b, c)?;
                            Some((x, d - a))
                        })
                        .collect();
                    let mut row = ReportRow::new(
                        report.analysis,
                        task,
                        metric.as_str(),
                        level,
                        band.name.as_str(),
                        &cell,
                        TestKind::Pearson,
                    );
                    pearson_row(cfg, &mut row, &pairs);
                    report.rows.push(row);
                }
            }
        }
    }
    report
}

/// Region-by-task (r, p) layout of one band's PSD rows.
pub fn region_task_table(report: &AnalysisReport, band: &str) -> Vec<(Region, Vec<(Option<f64>, Option<f64>)>)> {
    Region::ALL
        .iter()
        .map(|&region| {
            let cells = Task::ALL
                .iter()
                .map(|&task| match report.find(task, Metric::PsdDb.as_str(), band, region.abbrev()) {
                    Some(r) => (r.estimate, r.p_value),
                    None => (None, None),
                })
                .collect();
            (region, cells)
        })
        .collect()
}

/// Sign class of each region-pair edge for one (task, band) of a wPLI analysis.
pub fn edge_classes(report: &AnalysisReport, task: Task, band: &str) -> Vec<(RegionPair, super::figures::EdgeClass)> {
    use super::figures::EdgeClass;
    RegionPair::all()
        .into_iter()
        .map(|pair| {
            let class = match report.find(task, Metric::Wpli.as_str(), band, &pair.label()) {
                Some(r) if r.significant => match r.estimate {
                    Some(e) if e < 0.0 => EdgeClass::SigNeg,
                    _ => EdgeClass::SigPos,
                },
                _ => EdgeClass::Neutral,
            };
            (pair, class)
        })
        .collect()
}
