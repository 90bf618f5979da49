use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use napeeg::model::Metric;
use napeeg::pipeline::{self, LoadedConfig, StudyConfig};
use napeeg::stats::{kruskal_wallis, pearson, perm_paired, RngSpec, StatResult};
use napeeg::synth::{write_study, StudyTemplate};
use napeeg::{Error, Result};

#[derive(Parser)]
#[command(name = "napeeg", version, about = "Nap EEG and memory-recall analysis")]
struct Cli {
    /// Study config (template TOML for `synth`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic study with planted effects.
    Synth {
        /// Overrides the template's subject count.
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Preprocess and epoch every recording; writes epoch bookkeeping.
    Preprocess,
    /// Band power tables per subject and condition.
    Psd,
    /// wPLI tables per subject and condition.
    Wpli,
    /// Memory scores and the performance analysis.
    Score,
    /// A single test on a long-format CSV with columns unit, group, value.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        test: TestArg,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
    /// Every analysis, report table, figure and provenance record.
    RunAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Perm,
    Pearson,
    Kw,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Synth { subjects } => synth(cli.config.as_deref(), cli.seed, cli.out, subjects),
        Command::Stats {
            input,
            test,
            resamples,
        } => stats(&input, test, resamples, cli.seed.unwrap_or(0), cli.out.as_deref()),
        Command::Preprocess => {
            let loaded = load(&cli)?;
            let path = pipeline::write_epoch_summary(&loaded)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Psd => tables(&load(&cli)?, Metric::PsdDb),
        Command::Wpli => tables(&load(&cli)?, Metric::Wpli),
        Command::Score => {
            let loaded = load(&cli)?;
            let report = pipeline::write_performance(&loaded)?;
            warn_all(&report.warnings);
            println!("{}", loaded.config.output_dir.display());
            Ok(())
        }
        Command::RunAll => {
            let loaded = load(&cli)?;
            let summary = pipeline::run_all(&loaded)?;
            warn_all(&summary.warnings);
            println!("{}", summary.output_dir.display());
            Ok(())
        }
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn load(cli: &Cli) -> Result<LoadedConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut loaded = StudyConfig::load(path)?;
    if let Some(seed) = cli.seed {
        loaded.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        loaded.set_output_dir(out.clone());
    }
    Ok(loaded)
}

fn tables(loaded: &LoadedConfig, metric: Metric) -> Result<()> {
    let files = pipeline::write_features(loaded, &[metric])?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn synth(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>, subjects: Option<usize>) -> Result<()> {
    let mut template = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => Error::MissingFile(p.to_path_buf()),
                _ => Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                },
            })?;
            StudyTemplate::from_toml(&text)?
        }
        None => StudyTemplate::default(),
    };
    if let Some(s) = seed {
        template.seed = s;
    }
    if let Some(n) = subjects {
        template.n_subjects = n;
    }
    template.validate()?;
    let dir = out.unwrap_or_else(|| PathBuf::from("synthetic"));
    let path = write_study(&template, &dir)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Deserialize)]
struct LongRow {
    unit: String,
    #[serde(alias = "condition")]
    group: String,
    value: f64,
}

/// Groups in order of first appearance, each a unit → value map.
fn read_long(path: &Path) -> Result<Vec<(String, BTreeMap<String, f64>)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut groups: Vec<(String, BTreeMap<String, f64>)> = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let row: LongRow = row?;
        let idx = match groups.iter().position(|(g, _)| *g == row.group) {
            Some(i) => i,
            None => {
                groups.push((row.group.clone(), BTreeMap::new()));
                groups.len() - 1
            }
        };
        if groups[idx].1.insert(row.unit.clone(), row.value).is_some() {
            return Err(Error::Invalid(format!("unit {} appears twice in group {}", row.unit, row.group)));
        }
    }
    Ok(groups)
}

/// Values of the first two groups, paired by unit.
fn paired(groups: &[(String, BTreeMap<String, f64>)]) -> Result<(Vec<f64>, Vec<f64>)> {
    if groups.len() != 2 {
        return Err(Error::Invalid(format!("paired tests need exactly 2 groups, found {}", groups.len())));
    }
    let (a, b) = (&groups[0].1, &groups[1].1);
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(Error::Invalid("groups do not contain the same units".into()));
    }
    Ok(a.iter().map(|(k, &x)| (x, b[k])).unzip())
}

fn stats(input: &Path, test: TestArg, resamples: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let groups = read_long(input)?;
    let rng = RngSpec::new(seed);
    let names: Vec<&str> = groups.iter().map(|(g, _)| g.as_str()).collect();
    let (result, name): (StatResult, &str) = match test {
        TestArg::Perm => {
            let (a, b) = paired(&groups)?;
            (perm_paired(&a, &b, resamples, &rng, &names.join("-"))?, "perm")
        }
        TestArg::Pearson => {
            let (x, y) = paired(&groups)?;
            (pearson(&x, &y)?, "pearson")
        }
        TestArg::Kw => {
            let values: Vec<Vec<f64>> = groups.iter().map(|(_, m)| m.values().copied().collect()).collect();
            (kruskal_wallis(&values)?, "kw")
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "test",
        "groups",
        "n",
        "statistic",
        "p_value",
        "exact",
        "seed",
        "rng_algorithm",
        "resamples",
        "note",
    ])?;
    w.write_record([
        result.test.to_string(),
        names.join(";"),
        result.n.to_string(),
        result.statistic.to_string(),
        result.p_value.to_string(),
        result.exact.to_string(),
        seed.to_string(),
        rng.algorithm.clone(),
        resamples.to_string(),
        result.note.clone().unwrap_or_default(),
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            let path = dir.join(format!("stats_{name}.csv"));
            fs::write(&path, &bytes).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            println!("{}", path.display());
        }
        None => io::stdout().write_all(&bytes).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })?,
    }
    Ok(())
}
