mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn napeeg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_napeeg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn usage_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&napeeg(&["run-all"], dir.path())), 1);
    assert_eq!(code(&napeeg(&["run-all", "--config", "nope.toml"], dir.path())), 1);
    assert_eq!(code(&napeeg(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&napeeg(&["stats", "--test", "perm"], dir.path())), 1);
    assert_eq!(code(&napeeg(&["--help"], dir.path())), 0);

    fs::write(dir.path().join("bad.toml"), "subjects = []\n[stats]\nalpha = 2.0\n").unwrap();
    let o = napeeg(&["run-all", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn runtime_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = common::template(3, 21);
    t.artifact_rate = 1.0;
    let loaded = common::write(&t, &dir.path().join("study"));
    let cfg = loaded.base_dir.join("study.toml");
    let o = napeeg(&["run-all", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rejected"));
}

#[test]
fn stats_subcommand_reports_seed_and_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("unit,group,value\n");
    for i in 0..7 {
        csv.push_str(&format!("s{i},post,{}\n", 2.0 + i as f64));
        csv.push_str(&format!("s{i},pre,{}\n", 1.0 + i as f64));
    }
    fs::write(dir.path().join("long.csv"), csv).unwrap();

    let o = napeeg(&["stats", "--input", "long.csv", "--test", "perm", "--seed", "9"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("test,groups,n,statistic,p_value"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "perm_paired");
    assert_eq!(row[1], "post;pre");
    assert_eq!(row[2], "7");
    assert_eq!(row[4].parse::<f64>().unwrap(), 2.0 / 128.0);
    assert_eq!(row[5], "true");
    assert_eq!(row[6], "9");
    assert_eq!(row[7], "chacha8/sha256-stream");

    let o = napeeg(&["stats", "--input", "long.csv", "--test", "kw", "--out", "res"], dir.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("res/stats_kw.csv")).unwrap();
    assert!(text.contains("kruskal_wallis"));

    let o = napeeg(&["stats", "--input", "long.csv", "--test", "pearson"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "pearson");
    assert!((row[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);

    fs::write(dir.path().join("three.csv"), "unit,group,value\na,x,1\na,y,2\na,z,3\n").unwrap();
    assert_eq!(code(&napeeg(&["stats", "--input", "three.csv", "--test", "perm"], dir.path())), 1);
}

#[test]
fn subcommands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = napeeg(&["synth", "--seed", "4", "--subjects", "3", "--out", "study"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("study/S03/nap.csv").exists());
    assert!(!dir.path().join("study/S04").exists());

    let cfg = "study/study.toml";
    for (cmd, file) in [
        ("score", "scores.csv"),
        ("preprocess", "epochs.csv"),
        ("psd", "features/S01/nap_psd.csv"),
        ("wpli", "features/S02/delayed_location_wpli.csv"),
    ] {
        let out = format!("out_{cmd}");
        let o = napeeg(&[cmd, "--config", cfg, "--out", &out, "--jobs", "1"], dir.path());
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(&out).join(file).exists(), "{cmd}");
    }
    let psd = fs::read_to_string(dir.path().join("out_psd/features/S01/nap_psd.csv")).unwrap();
    assert_eq!(psd.lines().next().unwrap(), "band,F,C,T,P,O");
    assert!(!dir.path().join("out_psd/features/S01/nap_wpli.csv").exists());
}
