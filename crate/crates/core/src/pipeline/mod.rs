//! Config-driven end-to-end runs: feature extraction for every subject, the
//! four group analyses, report tables, figures and provenance.

pub mod analysis;
pub mod config;
pub mod features;
pub mod figures;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use analysis::ScoreTable;
pub use config::{LoadedConfig, StudyConfig, SubjectPaths};
pub use features::SubjectFeatures;
pub use report::{Analysis, AnalysisReport, Level, Provenance, ReportRow};

use crate::error::{Error, Result};
use crate::model::{save_table, Metric, Region, Session, Task};
use crate::stats::RngSpec;
use figures::{edge_svg, scatter_svg, Scatter};
use report::{fmt_opt, write_rows, write_text};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invalid(format!("{other:?}")),
    })
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scores of every subject in config order.
pub fn collect_scores(cfg: &StudyConfig) -> Result<(ScoreTable, Vec<String>)> {
    let sets = cfg
        .subjects
        .par_iter()
        .map(features::read_scores)
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let mut table = Vec::new();
    for (s, set) in cfg.subjects.iter().zip(sets) {
        warnings.extend(set.warnings);
        table.push((s.id.clone(), set.scores));
    }
    Ok((table, warnings))
}

/// Behavioral analysis only; needs response logs but no recordings.
pub fn run_performance(cfg: &StudyConfig) -> Result<AnalysisReport> {
    let (scores, warnings) = collect_scores(cfg)?;
    let mut report = analysis::performance(cfg, &scores);
    report.warnings.splice(0..0, warnings);
    Ok(report)
}

pub fn run_nap_feature_correlation(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> Result<AnalysisReport> {
    analysis::nap_feature_correlation(cfg, subjects)
}

pub fn run_recall_prepost(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> AnalysisReport {
    analysis::recall_prepost(cfg, subjects)
}

pub fn run_recall_feature_correlation(cfg: &StudyConfig, subjects: &[SubjectFeatures]) -> AnalysisReport {
    analysis::recall_feature_correlation(cfg, subjects)
}

pub fn provenance(loaded: &LoadedConfig) -> Result<Provenance> {
    let mut echo = serde_json::to_value(&loaded.raw)?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("output_dir");
    }
    Ok(Provenance {
        tool: TOOL.into(),
        version: VERSION.into(),
        config_sha256: loaded.sha256.clone(),
        seed: loaded.config.stats.seed,
        rng_algorithm: RngSpec::ALGORITHM.into(),
        resamples: loaded.config.stats.resamples,
        alpha: loaded.config.stats.alpha,
        config: echo,
    })
}

fn write_provenance(out: &Path, loaded: &LoadedConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(&provenance(loaded)?)?;
    write_text(&out.join("provenance.json"), &(text + "\n"))
}

/// Per-subject PSD and/or wPLI tables for every condition.
pub fn write_subject_tables(out: &Path, subjects: &[SubjectFeatures], metrics: &[Metric]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for s in subjects {
        let dir = out.join("features").join(&s.id);
        create_dir(&dir)?;
        let mut conditions = vec![("nap".to_string(), Some(&s.nap))];
        for ((session, task), f) in &s.recall {
            conditions.push((format!("{session}_{task}"), f.as_ref()));
        }
        for (name, f) in conditions {
            let Some(f) = f else { continue };
            for &m in metrics {
                let (table, suffix) = match m {
                    Metric::PsdDb => (&f.psd, "psd"),
                    Metric::Wpli => (&f.wpli, "wpli"),
                };
                let path = dir.join(format!("{name}_{suffix}.csv"));
                save_table(table, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Every subject-level feature in one long CSV.
fn write_features_long(out: &Path, subjects: &[SubjectFeatures]) -> Result<()> {
    let path = out.join("features.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["subject", "session", "task", "metric", "level", "band", "cell", "value", "n_epochs"])?;
    for s in subjects {
        let mut conditions = vec![("nap".to_string(), String::new(), Some(&s.nap))];
        for ((session, task), f) in &s.recall {
            conditions.push((session.to_string(), task.to_string(), f.as_ref()));
        }
        for (session, task, f) in conditions {
            let Some(f) = f else { continue };
            for table in [&f.psd, &f.wpli] {
                let level = match table.metric {
                    Metric::PsdDb => Level::Region,
                    Metric::Wpli => Level::Pair,
                };
                for (b, band) in table.bands.iter().enumerate() {
                    for (c, col) in table.metric.columns().iter().enumerate() {
                        w.write_record([
                            s.id.as_str(),
                            &session,
                            &task,
                            table.metric.as_str(),
                            level.as_str(),
                            band.name.as_str(),
                            col,
                            &fmt_opt(table.values[b][c]),
                            &table.n_epochs_used[b][c].to_string(),
                        ])?;
                    }
                }
            }
            let cp = &f.channel_psd;
            for (b, band) in cp.bands.iter().enumerate() {
                for (c, ch) in cp.channels.iter().enumerate() {
                    w.write_record([
                        s.id.as_str(),
                        &session,
                        &task,
                        Metric::PsdDb.as_str(),
                        Level::Electrode.as_str(),
                        band.name.as_str(),
                        ch,
                        &fmt_opt(cp.db[b][c]),
                        &cp.n_epochs.to_string(),
                    ])?;
                }
            }
        }
    }
    flush(w, &path)
}

pub fn write_scores(out: &Path, scores: &ScoreTable) -> Result<PathBuf> {
    let path = out.join("scores.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["subject", "task", "immediate", "delayed", "diff"])?;
    for (id, s) in scores {
        for task in Task::ALL {
            let a = s.get(&(Session::Immediate, task)).copied().flatten();
            let b = s.get(&(Session::Delayed, task)).copied().flatten();
            let d = a.zip(b).map(|(a, b)| b - a);
            w.write_record([id.as_str(), task.as_str(), &fmt_opt(a), &fmt_opt(b), &fmt_opt(d)])?;
        }
    }
    flush(w, &path)?;
    Ok(path)
}

fn grid_columns(cfg: &StudyConfig) -> Vec<(Metric, String, String)> {
    let mut cols = Vec::new();
    for metric in [Metric::PsdDb, Metric::Wpli] {
        for band in &cfg.bands {
            for cell in metric.columns() {
                cols.push((metric, band.name.as_str().to_string(), cell));
            }
        }
    }
    cols
}

/// Task rows × (metric, band, cell) columns of r and p.
fn write_correlation_grids(out: &Path, cfg: &StudyConfig, report: &AnalysisReport) -> Result<()> {
    let cols = grid_columns(cfg);
    for (file, pick) in [
        ("nap_correlation_r.csv", (|r: &ReportRow| r.estimate) as fn(&ReportRow) -> Option<f64>),
        ("nap_correlation_p.csv", |r: &ReportRow| r.p_value),
    ] {
        let path = out.join(file);
        let mut w = csv_writer(&path)?;
        let mut header = vec!["task".to_string()];
        header.extend(cols.iter().map(|(m, b, c)| format!("{}/{b}/{c}", m.as_str())));
        w.write_record(&header)?;
        for task in Task::ALL {
            let mut rec = vec![task.to_string()];
            for (m, b, c) in &cols {
                rec.push(fmt_opt(report.find(task, m.as_str(), b, c).and_then(pick)));
            }
            w.write_record(&rec)?;
        }
        flush(w, &path)?;
    }
    Ok(())
}

/// One file per band: region rows, (r, p) column pair per task.
fn write_region_task_tables(out: &Path, cfg: &StudyConfig, report: &AnalysisReport) -> Result<()> {
    for band in &cfg.bands {
        let path = out.join(format!("recall_correlation_{}.csv", band.name.as_str()));
        let mut w = csv_writer(&path)?;
        let mut header = vec!["region".to_string()];
        for t in Task::ALL {
            header.push(format!("{t}_r"));
            header.push(format!("{t}_p"));
        }
        w.write_record(&header)?;
        for (region, cells) in analysis::region_task_table(report, band.name.as_str()) {
            let mut rec = vec![region.as_str().to_string()];
            for (r, p) in cells {
                rec.push(fmt_opt(r));
                rec.push(fmt_opt(p));
            }
            w.write_record(&rec)?;
        }
        flush(w, &path)?;
    }
    Ok(())
}

fn write_figures(out: &Path, cfg: &StudyConfig, subjects: &[SubjectFeatures], reports: &[AnalysisReport]) -> Result<()> {
    let dir = out.join("figures");
    create_dir(&dir)?;

    let points_path = dir.join("nap_scatter_points.csv");
    let mut w = csv_writer(&points_path)?;
    w.write_record(["task", "band", "region", "subject", "nap_psd_db", "score_diff"])?;
    let nap = reports.iter().find(|r| r.analysis == Analysis::NapFeatureCorrelation);
    for task in Task::ALL {
        for (b, band) in cfg.bands.iter().enumerate() {
            for region in Region::ALL {
                let mut pts = Vec::new();
                for s in subjects {
                    if let (Some(x), Some(y)) = (s.nap.psd.region_value(b, region), s.score_diff(task)) {
                        w.write_record([
                            task.as_str(),
                            band.name.as_str(),
                            region.abbrev(),
                            &s.id,
                            &x.to_string(),
                            &y.to_string(),
                        ])?;
                        pts.push((x, y));
                    }
                }
                let Some(row) = nap.and_then(|r| r.find(task, Metric::PsdDb.as_str(), band.name.as_str(), region.abbrev()))
                else {
                    continue;
                };
                if row.significant {
                    let title = format!("{} {} {}", task, band.name.as_str(), region.as_str());
                    let svg = scatter_svg(&Scatter {
                        title: &title,
                        x_label: "nap PSD (dB)",
                        y_label: "delayed - immediate score",
                        points: &pts,
                        r: row.estimate,
                        p: row.p_value,
                    });
                    let name = format!("nap_scatter_{}_{}_{}.svg", task, band.name.as_str(), region.abbrev());
                    write_text(&dir.join(name), &svg)?;
                }
            }
        }
    }
    flush(w, &points_path)?;

    let edges_path = dir.join("edges.csv");
    let mut w = csv_writer(&edges_path)?;
    w.write_record(["analysis", "task", "band", "pair", "class", "estimate", "p_value"])?;
    for report in reports {
        let prefix = match report.analysis {
            Analysis::NapFeatureCorrelation => "nap_wpli",
            Analysis::RecallPrepost => "recall_wpli",
            _ => continue,
        };
        for task in Task::ALL {
            for band in &cfg.bands {
                let b = band.name.as_str();
                let edges = analysis::edge_classes(report, task, b);
                for (pair, class) in &edges {
                    let row = report.find(task, Metric::Wpli.as_str(), b, &pair.label());
                    w.write_record([
                        report.analysis.as_str(),
                        task.as_str(),
                        b,
                        &pair.label(),
                        class.as_str(),
                        &fmt_opt(row.and_then(|r| r.estimate)),
                        &fmt_opt(row.and_then(|r| r.p_value)),
                    ])?;
                }
                let svg = edge_svg(&format!("{} {task} {b}", report.analysis), &edges);
                write_text(&dir.join(format!("{prefix}_{task}_{b}.svg")), &svg)?;
            }
        }
    }
    flush(w, &edges_path)
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub reports: Vec<AnalysisReport>,
    pub warnings: Vec<String>,
}

/// Writes the report CSVs, per-subject tables, figures and provenance of a
/// full run. Report content depends only on the config and its seed.
pub fn run_all(loaded: &LoadedConfig) -> Result<RunSummary> {
    let cfg = &loaded.config;
    cfg.check_files()?;
    let out = cfg.output_dir.clone();
    create_dir(&out)?;

    let subjects = features::extract_all(cfg)?;
    let mut warnings: Vec<String> = subjects.iter().flat_map(|s| s.warnings.iter().cloned()).collect();
    let scores: ScoreTable = subjects.iter().map(|s| (s.id.clone(), s.scores.clone())).collect();

    let reports = vec![
        analysis::performance(cfg, &scores),
        analysis::nap_feature_correlation(cfg, &subjects)?,
        analysis::recall_prepost(cfg, &subjects),
        analysis::recall_feature_correlation(cfg, &subjects),
    ];
    for r in &reports {
        warnings.extend(r.warnings.iter().cloned());
    }

    write_scores(&out, &scores)?;
    write_subject_tables(&out, &subjects, &[Metric::PsdDb, Metric::Wpli])?;
    write_features_long(&out, &subjects)?;
    for r in &reports {
        write_rows(&out.join(format!("{}.csv", r.analysis)), &r.rows)?;
    }
    let prepost = &reports[2];
    let electrodes: Vec<ReportRow> = prepost.rows.iter().filter(|r| r.level == Level::Electrode).cloned().collect();
    write_rows(&out.join("recall_prepost_electrodes.csv"), &electrodes)?;
    write_correlation_grids(&out, cfg, &reports[1])?;
    write_region_task_tables(&out, cfg, &reports[3])?;
    write_figures(&out, cfg, &subjects, &reports)?;
    let mut text = warnings.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_text(&out.join("warnings.txt"), &text)?;
    write_provenance(&out, loaded)?;

    Ok(RunSummary {
        output_dir: out,
        reports,
        warnings,
    })
}

/// Epoch bookkeeping (onset, rejection flag) for every condition of every subject.
pub fn write_epoch_summary(loaded: &LoadedConfig) -> Result<PathBuf> {
    let cfg = &loaded.config;
    cfg.check_files()?;
    create_dir(&cfg.output_dir)?;
    let rows = cfg
        .subjects
        .par_iter()
        .map(|s| -> Result<Vec<[String; 6]>> {
            let mut rows = Vec::new();
            let mut push = |set: &crate::model::EpochSet, session: &str, task: &str| {
                for e in &set.epochs {
                    rows.push([
                        s.id.clone(),
                        session.to_string(),
                        task.to_string(),
                        e.index.to_string(),
                        e.onset_s.to_string(),
                        e.rejected.to_string(),
                    ]);
                }
            };
            push(&features::nap_epochs(cfg, s)?, "nap", "");
            let set = features::read_scores(s)?;
            for (session, data, meta) in [
                (Session::Immediate, &s.recall_immediate, s.recall_immediate_meta()),
                (Session::Delayed, &s.recall_delayed, s.recall_delayed_meta()),
            ] {
                let rec = features::load_preprocessed(cfg, data, &meta)?;
                for task in Task::ALL {
                    let ep = features::recall_epochs(cfg, s, &rec, session, task, &set.responses, &set.adjudications)?;
                    push(&ep.epochs, session.as_str(), task.as_str());
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = cfg.output_dir.join("epochs.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["subject", "session", "task", "index", "onset_s", "rejected"])?;
    for r in rows.into_iter().flatten() {
        w.write_record(&r)?;
    }
    flush(w, &path)?;
    Ok(path)
}

/// Features of every subject with the given tables written per subject.
pub fn write_features(loaded: &LoadedConfig, metrics: &[Metric]) -> Result<Vec<PathBuf>> {
    let cfg = &loaded.config;
    cfg.check_files()?;
    create_dir(&cfg.output_dir)?;
    let subjects = features::extract_all(cfg)?;
    write_subject_tables(&cfg.output_dir, &subjects, metrics)
}

/// Scores and the behavioral analysis.
pub fn write_performance(loaded: &LoadedConfig) -> Result<AnalysisReport> {
    let cfg = &loaded.config;
    for s in &cfg.subjects {
        if !s.responses.exists() {
            return Err(Error::MissingFile(s.responses.clone()));
        }
    }
    create_dir(&cfg.output_dir)?;
    let (scores, warnings) = collect_scores(cfg)?;
    write_scores(&cfg.output_dir, &scores)?;
    let mut report = analysis::performance(cfg, &scores);
    report.warnings.splice(0..0, warnings);
    write_rows(&cfg.output_dir.join("performance.csv"), &report.rows)?;
    Ok(report)
}
