mod common;

use std::fs;

use napeeg::model::io::{read_responses, write_responses};
use napeeg::model::{Session, Task};
use napeeg::pipeline::analysis;
use napeeg::pipeline::features::extract_all;
use napeeg::pipeline::report::Level;
use napeeg::pipeline::{run_all, run_performance, Analysis};
use napeeg::Error;

#[test]
fn performance_recovers_word_pair_gain() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(7, 3), dir.path());
    let report = run_performance(&loaded.config).unwrap();
    assert_eq!(report.rows.len(), 3);
    let wp = report.find(Task::WordPairs, "score", "", "").unwrap();
    assert!(wp.estimate.unwrap() > 0.0);
    assert!(wp.p_value.unwrap() < 0.05, "{:?}", wp.p_value);
    assert_eq!(wp.n, 7);
    assert!(!wp.corrected);
}

#[test]
fn identical_sessions_give_null_performance() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(4, 5), dir.path());
    for s in &loaded.config.subjects {
        let rows = read_responses(&s.responses).unwrap();
        let mut copy: Vec<_> = rows.iter().filter(|r| r.session == Session::Immediate).cloned().collect();
        let delayed: Vec<_> = copy
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.session = Session::Delayed;
                r
            })
            .collect();
        copy.extend(delayed);
        write_responses(&s.responses, &copy).unwrap();
    }
    let report = run_performance(&loaded.config).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert_eq!(row.estimate, Some(0.0));
        assert_eq!(row.p_value, Some(1.0));
        assert_eq!(row.statistic, Some(0.0));
        assert!(!row.note.is_empty());
    }
}

#[test]
fn subject_without_delayed_session_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(4, 6), dir.path());
    let s = &loaded.config.subjects[0];
    let rows: Vec<_> = read_responses(&s.responses)
        .unwrap()
        .into_iter()
        .filter(|r| r.session == Session::Immediate)
        .collect();
    write_responses(&s.responses, &rows).unwrap();
    let report = run_performance(&loaded.config).unwrap();
    assert!(report.rows.iter().all(|r| r.n == 3));
    assert!(report.warnings.iter().any(|w| w.contains("S01")));
}

#[test]
fn analyses_cover_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(5, 7), dir.path());
    let cfg = &loaded.config;
    let subjects = extract_all(cfg).unwrap();
    assert_eq!(subjects.len(), 5);

    let nap = analysis::nap_feature_correlation(cfg, &subjects).unwrap();
    assert_eq!(nap.rows.len(), 360);
    assert!(nap.rows.iter().all(|r| !r.corrected && r.n_comparisons == 1));

    let pre = analysis::recall_prepost(cfg, &subjects);
    let n_electrodes = subjects[0].channels.len();
    assert_eq!(pre.rows.len(), 3 * 6 * (5 + n_electrodes) + 3 * 6 * 15);
    for r in &pre.rows {
        if let (Some(p), Some(raw)) = (r.p_value, r.p_uncorrected) {
            assert!(p >= raw);
            assert!(r.corrected);
            let family = match r.level {
                Level::Region => 5,
                Level::Pair => 15,
                Level::Electrode => n_electrodes,
                Level::Task => unreachable!(),
            };
            assert!(r.n_comparisons <= family);
        }
    }

    let rec = analysis::recall_feature_correlation(cfg, &subjects);
    assert_eq!(rec.rows.len(), 360);
    let table = analysis::region_task_table(&rec, "gamma");
    assert_eq!(table.len(), 5);
    assert!(table.iter().all(|(_, cells)| cells.len() == 3));
}

#[test]
fn degenerate_features_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(4, 8), dir.path());
    let cfg = &loaded.config;
    let mut subjects = extract_all(cfg).unwrap();

    for s in &mut subjects {
        s.nap.psd.values[5][0] = Some(-3.0);
        for task in Task::ALL {
            let imm = s.recall[&(Session::Immediate, task)].clone();
            s.recall.insert((Session::Delayed, task), imm);
        }
    }
    let rec = analysis::recall_feature_correlation(cfg, &subjects);
    for task in Task::ALL {
        let row = rec.find(task, "psd_db", "gamma", "F").unwrap();
        assert_eq!(row.note, "undefined (zero variance)");
        assert_eq!(row.p_value, None);
    }

    let pre = analysis::recall_prepost(cfg, &subjects);
    assert!(pre.rows.iter().all(|r| !r.significant));
    assert!(pre.rows.iter().filter(|r| r.p_value.is_some()).all(|r| r.p_value == Some(1.0)));
}

#[test]
fn planted_recall_drop_survives_correction() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(10, 9), dir.path());
    let subjects = extract_all(&loaded.config).unwrap();
    let pre = analysis::recall_prepost(&loaded.config, &subjects);
    let row = pre
        .rows
        .iter()
        .find(|r| r.task == Task::WordPairs && r.metric == "psd_db" && r.band == "spindle" && r.cell == "T")
        .unwrap();
    // Planted −6 dB; 400 ms windows give 2.5 Hz bins, so unchanged alpha and
    // beta power leaks into the spindle band and dilutes the measured drop.
    assert!(row.estimate.unwrap() < -1.5, "{:?}", row.estimate);
    assert!(row.corrected && row.significant, "{row:?}");
    assert!(row.kw_p.unwrap() < 0.05);
}

#[test]
fn planted_coupling_is_positive() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(8, 10), dir.path());
    let subjects = extract_all(&loaded.config).unwrap();
    let rec = analysis::recall_feature_correlation(&loaded.config, &subjects);
    let row = rec.find(Task::WordPairs, "psd_db", "gamma", "F").unwrap();
    assert!(row.estimate.unwrap() > 0.5, "{row:?}");
}

#[test]
fn too_few_subjects_for_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = common::template(2, 11);
    t.effects.clear();
    let loaded = common::write(&t, dir.path());
    let subjects = extract_all(&loaded.config).unwrap();
    assert!(matches!(
        analysis::nap_feature_correlation(&loaded.config, &subjects),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn excessive_rejection_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = common::template(3, 12);
    t.artifact_rate = 1.0;
    let loaded = common::write(&t, dir.path());
    let err = run_all(&loaded).unwrap_err();
    assert!(matches!(err, Error::ExcessiveRejection { .. }), "{err}");
    assert!(!err.is_validation());
}

#[test]
fn missing_file_stops_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(3, 13), dir.path());
    fs::remove_file(&loaded.config.subjects[1].events).unwrap();
    assert!(matches!(run_all(&loaded), Err(Error::MissingFile(_))));
}

#[test]
fn run_all_writes_reports_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = common::write(&common::template(4, 14), dir.path());
    let summary = run_all(&loaded).unwrap();
    let out = &summary.output_dir;
    assert_eq!(summary.reports.len(), 4);
    for a in [
        Analysis::Performance,
        Analysis::NapFeatureCorrelation,
        Analysis::RecallPrepost,
        Analysis::RecallFeatureCorrelation,
    ] {
        let text = fs::read_to_string(out.join(format!("{a}.csv"))).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[0], a.as_str());
            assert!(["bonferroni", "uncorrected"].contains(&f[12]), "{line}");
            assert!(f[7].parse::<usize>().is_ok());
        }
    }
    let edges = fs::read_to_string(out.join("figures/edges.csv")).unwrap();
    assert_eq!(edges.lines().count(), 1 + 2 * 3 * 6 * 15);
    let svg = fs::read_to_string(out.join("figures/nap_wpli_location_spindle.svg")).unwrap();
    assert_eq!(svg.matches("class=\"edge ").count(), 15);
    let prov: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 14);
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);
    assert!(prov["config"].get("output_dir").is_none());
    assert!(prov["config"]["subjects"].is_array());
}
