//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 simulation fault,
//! 3 I/O error. The configuration is fully validated before anything is
//! written, and every artifact is written to a temporary file first and then
//! renamed, so a failed command never leaves a partial artifact behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, ControllerEntry};
use crate::controllers::ControllerKind;
use crate::harness::artifacts::{
    rank_rows, write_compare_csv, write_json, write_run_csv, write_sweep_csv, CompareRow,
    RunSummary,
};
use crate::harness::{
    run_scenario, sensitivity_sweep, tune_gains, Metrics, SweepTable, TuneOutcome,
};

#[derive(Debug, Parser)]
#[command(
    name = "belbic-grid",
    version,
    about = "Microgrid secondary-control simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; the built-in defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel runs (default: number of processors).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Top-level seed (overrides `seed`).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Restrict to controller entries of this kind.
    #[arg(
        long,
        global = true,
        value_name = "KIND",
        value_parser = parse_kind,
    )]
    pub controller: Option<ControllerKind>,
}

fn parse_kind(s: &str) -> Result<ControllerKind, String> {
    s.parse::<ControllerKind>()
        .map_err(|_| format!("expected one of none, pid, nn, belbic; got `{s}`"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run one controller on the scenario.
    Run,
    /// Run every controller entry and rank them.
    Compare,
    /// Sweep a machine parameter across the configured controllers.
    Sweep,
    /// Tune the gains of one controller entry.
    Tune,
    /// Print the default configuration.
    PrintDefaults,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Config(String),
    Simulation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Simulation(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Simulation(m) => write!(f, "simulation fault: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to `out` and `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Loads the configuration named by `--config` and applies the overrides.
pub fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Config::from_toml(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if cli.command == Command::PrintDefaults {
        return write!(out, "{}", Config::default().to_toml())
            .map_err(|e| CliError::Io(e.to_string()));
    }
    let cfg = load_config(cli)?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Config("--workers must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let written = pool.install(|| match cli.command {
        Command::Run => cmd_run(&cfg, cli.controller),
        Command::Compare => cmd_compare(&cfg, cli.controller),
        Command::Sweep => cmd_sweep(&cfg, cli.controller),
        Command::Tune => cmd_tune(&cfg, cli.controller),
        Command::PrintDefaults => unreachable!("handled above"),
    });
    let report = |files: &[PathBuf], out: &mut dyn Write| {
        for f in files {
            let _ = writeln!(out, "wrote {}", f.display());
        }
    };
    match written {
        Ok(files) => {
            report(&files, out);
            Ok(())
        }
        Err((files, e)) => {
            report(&files, out);
            Err(e)
        }
    }
}

/// Files written so far, and the error that ended the command if any.
type CmdResult = Result<Vec<PathBuf>, (Vec<PathBuf>, CliError)>;

/// Buffered artifacts, flushed together once the command has run.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn csv(&mut self, name: String, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) {
        let mut buf = Vec::new();
        f(&mut buf).expect("writing CSV to memory cannot fail");
        self.files.push((name, buf));
    }

    fn json<T: Serialize>(&mut self, name: String, value: &T) {
        let mut buf = Vec::new();
        write_json(&mut buf, value).expect("writing JSON to memory cannot fail");
        self.files.push((name, buf));
    }

    fn flush(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut done = Vec::new();
        for (name, bytes) in self.files {
            let path = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, &bytes).map_err(|e| io_err(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
            done.push(path);
        }
        Ok(done)
    }
}

/// Flushes the artifacts, then reports `outcome`.
fn finish(cfg: &Config, artifacts: Artifacts, outcome: Result<(), CliError>) -> CmdResult {
    let files = artifacts
        .flush(Path::new(&cfg.out_dir))
        .map_err(|e| (Vec::new(), e))?;
    match outcome {
        Ok(()) => Ok(files),
        Err(e) => Err((files, e)),
    }
}

fn select(cfg: &Config, kind: Option<ControllerKind>) -> Vec<&ControllerEntry> {
    cfg.controllers
        .iter()
        .filter(|c| kind.is_none_or(|k| c.kind == k))
        .collect()
}

fn run_entry(
    cfg: &Config,
    hash: &str,
    entry: &ControllerEntry,
    artifacts: &mut Artifacts,
) -> RunSummary {
    let scenario = cfg.scenario_for(entry);
    let result = run_scenario(&scenario).expect("scenario validated with the configuration");
    let stem = format!("run-{}-{hash}", entry.name);
    artifacts.csv(format!("{stem}.csv"), |b| write_run_csv(b, &result));
    let summary = RunSummary::new(&entry.name, hash, &result);
    artifacts.json(format!("{stem}.json"), &summary);
    summary
}

fn fault_message(s: &RunSummary) -> Option<String> {
    s.faults
        .first()
        .map(|f| format!("t={}: {}", f.time, f.message))
}

pub fn cmd_run(cfg: &Config, kind: Option<ControllerKind>) -> CmdResult {
    let hash = cfg.hash();
    let entry = match kind {
        None => cfg.controllers[0].clone(),
        Some(ControllerKind::None) => select(cfg, kind)
            .first()
            .map(|e| (*e).clone())
            .unwrap_or_else(|| ControllerEntry::none("none")),
        Some(k) => select(cfg, kind)
            .first()
            .map(|e| (*e).clone())
            .ok_or_else(|| {
                (
                    vec![],
                    CliError::Config(format!("no controller entry of kind `{k}`")),
                )
            })?,
    };
    let mut artifacts = Artifacts::default();
    let summary = run_entry(cfg, &hash, &entry, &mut artifacts);
    let outcome = match fault_message(&summary) {
        Some(m) if !summary.completed => Err(CliError::Simulation(format!("{}: {m}", entry.name))),
        _ => Ok(()),
    };
    finish(cfg, artifacts, outcome)
}

#[derive(Debug, Serialize)]
struct CompareIndex<'a> {
    config_hash: &'a str,
    seed: u64,
    table: String,
    rows: &'a [CompareRow],
}

pub fn cmd_compare(cfg: &Config, kind: Option<ControllerKind>) -> CmdResult {
    let hash = cfg.hash();
    let entries = select(cfg, kind);
    if entries.is_empty() {
        let k = kind.expect("the default config has controller entries");
        return Err((
            vec![],
            CliError::Config(format!("no controller entry of kind `{k}`")),
        ));
    }
    let runs: Vec<(RunSummary, Artifacts)> = entries
        .par_iter()
        .map(|e| {
            let mut a = Artifacts::default();
            let s = run_entry(cfg, &hash, e, &mut a);
            (s, a)
        })
        .collect();
    let mut artifacts = Artifacts::default();
    let mut rows = Vec::new();
    let mut completed = 0;
    for (summary, a) in runs {
        artifacts.files.extend(a.files);
        completed += usize::from(summary.completed);
        let fault = fault_message(&summary);
        let metrics = if summary.completed {
            summary.metrics.clone()
        } else {
            None
        };
        rows.push((summary.name, summary.kind, metrics, fault));
    }
    let rows = rank_rows(rows);
    let table = format!("compare-{hash}.csv");
    artifacts.csv(table.clone(), |b| write_compare_csv(b, &rows));
    artifacts.json(
        format!("compare-{hash}.json"),
        &CompareIndex {
            config_hash: &hash,
            seed: cfg.seed,
            table,
            rows: &rows,
        },
    );
    let outcome = if completed == 0 {
        Err(CliError::Simulation("every run faulted".into()))
    } else {
        Ok(())
    };
    finish(cfg, artifacts, outcome)
}

#[derive(Debug, Serialize)]
struct SweepIndex<'a> {
    config_hash: &'a str,
    seed: u64,
    values: &'a [f64],
    controllers: Vec<&'a str>,
    table_csv: String,
    #[serde(flatten)]
    table: &'a SweepTable,
}

pub fn cmd_sweep(cfg: &Config, kind: Option<ControllerKind>) -> CmdResult {
    let hash = cfg.hash();
    let entries: Vec<&ControllerEntry> = cfg
        .sweep
        .controllers
        .iter()
        .filter_map(|n| cfg.controller(n))
        .filter(|c| kind.is_none_or(|k| c.kind == k))
        .collect();
    if entries.is_empty() {
        return Err((
            vec![],
            CliError::Config("sweep.controllers: no entry matches --controller".into()),
        ));
    }
    // the controller is replaced per cell; the base carries the shared scenario
    let base = cfg.scenario_for(entries[0]);
    let controllers: Vec<_> = entries
        .iter()
        .map(|e| (e.name.clone(), cfg.scenario_for(e).controller))
        .collect();
    let table = sensitivity_sweep(
        &base,
        &controllers,
        cfg.sweep.param,
        &cfg.sweep.values,
        cfg.sweep.target,
    )
    .map_err(|e| (vec![], CliError::Config(e.to_string())))?;
    let stem = format!("sweep-{}-{hash}", cfg.sweep.param.name());
    let mut artifacts = Artifacts::default();
    artifacts.csv(format!("{stem}.csv"), |b| write_sweep_csv(b, &table));
    artifacts.json(
        format!("{stem}.json"),
        &SweepIndex {
            config_hash: &hash,
            seed: cfg.seed,
            values: &cfg.sweep.values,
            controllers: entries.iter().map(|e| e.name.as_str()).collect(),
            table_csv: format!("{stem}.csv"),
            table: &table,
        },
    );
    let outcome = if table.cells.iter().all(|c| c.fault.is_some()) {
        Err(CliError::Simulation("every sweep cell faulted".into()))
    } else {
        Ok(())
    };
    finish(cfg, artifacts, outcome)
}

#[derive(Debug, Serialize)]
struct TuneReport<'a> {
    config_hash: &'a str,
    controller: &'a str,
    kind: ControllerKind,
    /// Top-level seed; `outcome.seed` is the tuner seed derived from it.
    seed: u64,
    best_gains: &'a std::collections::BTreeMap<String, f64>,
    score: f64,
    metrics: &'a Metrics,
    score_trace: &'a [f64],
    evaluations: usize,
    faulted: usize,
    tuner_seed: u64,
    /// The tuned controller as a `[[controller]]` entry.
    controller_toml: String,
}

pub fn cmd_tune(cfg: &Config, kind: Option<ControllerKind>) -> CmdResult {
    let hash = cfg.hash();
    let mut cfg = cfg.clone();
    if let Some(k) = kind {
        let entry = select(&cfg, Some(k))
            .first()
            .map(|e| e.name.clone())
            .ok_or_else(|| {
                (
                    vec![],
                    CliError::Config(format!("no controller entry of kind `{k}`")),
                )
            })?;
        cfg.tune.controller = entry;
        cfg.tune.bounds.clear();
        cfg.validate()
            .map_err(|e| (vec![], CliError::Config(e.to_string())))?;
    }
    let entry = cfg
        .controller(&cfg.tune.controller)
        .expect("validated")
        .clone();
    let scenario = cfg.scenario_for(&entry);
    let outcome: TuneOutcome = tune_gains(&scenario, &cfg.tune_settings()).map_err(|e| {
        let err = match e {
            crate::harness::TuneError::AllFaulted(_) => CliError::Simulation(e.to_string()),
            _ => CliError::Config(e.to_string()),
        };
        (vec![], err)
    })?;
    let tuned = match &outcome.spec {
        crate::harness::ControllerSpec::Pid(c) => ControllerEntry::pid(&entry.name, *c),
        crate::harness::ControllerSpec::Belbic(c) => ControllerEntry::belbic(&entry.name, *c),
        _ => entry.clone(),
    };
    #[derive(Serialize)]
    struct Wrap<'a> {
        controller: [&'a ControllerEntry; 1],
    }
    let controller_toml = toml::to_string(&Wrap {
        controller: [&tuned],
    })
    .expect("entry serialises");
    let mut artifacts = Artifacts::default();
    artifacts.json(
        format!("tune-{}-{hash}.json", entry.name),
        &TuneReport {
            config_hash: &hash,
            controller: &entry.name,
            kind: entry.kind,
            seed: cfg.seed,
            best_gains: &outcome.params,
            score: outcome.score,
            metrics: &outcome.metrics,
            score_trace: &outcome.score_trace,
            evaluations: outcome.evaluations,
            faulted: outcome.faulted,
            tuner_seed: outcome.seed,
            controller_toml,
        },
    );
    finish(&cfg, artifacts, Ok(()))
}
