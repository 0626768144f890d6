//! `cftdrive`: batch front end for trace-map heatmaps, preimage clouds,
//! entropy series, RMD lifetime scaling, non-Hermitian phase diagrams and
//! trace trajectories.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 numeric error.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{Section, Values};
use output::{Format, SweepManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<cftdrive::Error> for CliError {
    fn from(e: cftdrive::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cftdrive",
    version,
    about = "Driven-CFT heating sweeps: CSV/JSON data plus a reproducibility manifest"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Ini config: a [run] section plus the command's section.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed (overrides [run] seed).
    #[arg(long, global = true, env = "CFTDRIVE_SEED", value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads, 0 = all cores (overrides [run] threads).
    #[arg(long, global = true, env = "CFTDRIVE_THREADS", value_name = "N")]
    threads: Option<usize>,
    /// Output path; side tables and the manifest are written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Override one key of the command section (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Trace-map escape times on a parameter or trace-space grid.
    Heatmap,
    /// Preimages of the fixed point (4, 2) up to a given order.
    Preimages,
    /// Entanglement (or pseudo-) entropy series from the CFT and/or the lattice.
    Entropy,
    /// RMD prethermal lifetime against K, with log-log fits per η.
    Scaling,
    /// Non-Hermitian phase diagram and its analytic boundary.
    Phase,
    /// RMD trace trajectory against the averaged-block orbit.
    Trajectory,
    /// Run whichever command section the --config file contains.
    Run,
    /// Reproduce an output from its manifest.
    Rerun {
        /// Manifest written next to an earlier output.
        manifest: PathBuf,
    },
}

impl Cmd {
    fn name(&self) -> Option<&'static str> {
        Some(match self {
            Cmd::Heatmap => "heatmap",
            Cmd::Preimages => "preimages",
            Cmd::Entropy => "entropy",
            Cmd::Scaling => "scaling",
            Cmd::Phase => "phase",
            Cmd::Trajectory => "trajectory",
            Cmd::Run | Cmd::Rerun { .. } => return None,
        })
    }
}

/// Everything needed to produce the data files.
struct Plan {
    command: String,
    section: Section,
    seed: u64,
    threads: usize,
    format: Format,
    out: PathBuf,
}

fn parse_overrides(set: &[String]) -> Result<Section, CliError> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))
        })
        .collect()
}

fn plan_from_config(g: &Global, subcommand: Option<&str>) -> Result<Plan, CliError> {
    let mut sections = match &g.config {
        Some(p) => config::load_file(p)?,
        None => BTreeMap::new(),
    };
    let run_given = sections.remove("run").unwrap_or_default();
    let command = match subcommand {
        Some(c) => c.to_string(),
        None => match sections.keys().next() {
            Some(c) if sections.len() == 1 => c.clone(),
            _ => return Err(CliError::Config("`run` needs a config with exactly one command section".into())),
        },
    };
    let keys = config::keys_for(&command).ok_or_else(|| CliError::Config(format!("unknown section [{command}]")))?;
    if let Some(other) = sections.keys().find(|s| **s != command) {
        return Err(CliError::Config(format!("section [{other}] does not belong to command '{command}'")));
    }
    let mut given = sections.remove(&command).unwrap_or_default();
    given.extend(parse_overrides(&g.set)?);
    let section = config::resolve(&command, keys, &given)?;

    let run = config::resolve("run", config::RUN_KEYS, &run_given)?;
    let rv = Values { section: "run", map: &run };
    let seed = match g.seed {
        Some(s) => s,
        None => rv.parse("seed")?,
    };
    let threads = match g.threads {
        Some(t) => t,
        None => rv.parse("threads")?,
    };
    let format = Format::parse(g.format.as_deref().unwrap_or(rv.raw("format")))?;
    let out = match (&g.out, rv.raw("out").trim()) {
        (Some(p), _) => p.clone(),
        (None, "") => PathBuf::from(format!("{command}.{}", format.ext())),
        (None, p) => PathBuf::from(p),
    };
    Ok(Plan { command, section, seed, threads, format, out })
}

fn plan_from_manifest(g: &Global, path: &Path) -> Result<Plan, CliError> {
    if g.config.is_some() || !g.set.is_empty() || g.format.is_some() {
        return Err(CliError::Config("rerun takes its configuration from the manifest".into()));
    }
    let m = SweepManifest::read(path)?;
    if g.seed.is_some_and(|s| s != m.seed) {
        return Err(CliError::Config(format!("rerun reproduces seed {}; drop --seed / CFTDRIVE_SEED", m.seed)));
    }
    let keys =
        config::keys_for(&m.command).ok_or_else(|| CliError::Config(format!("unknown command '{}'", m.command)))?;
    let section = config::resolve(&m.command, keys, &m.config)?;
    let out =
        g.out.clone().ok_or_else(|| CliError::Config("rerun needs --out (the original is not overwritten)".into()))?;
    Ok(Plan { command: m.command, section, seed: m.seed, threads: g.threads.unwrap_or(0), format: m.format, out })
}

fn execute(plan: &Plan) -> Result<(), CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let values = Values { section: &plan.command, map: &plan.section };
    let report = pool.install(|| commands::run(&plan.command, &values, plan.seed))?;
    if let Some(dir) = plan.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let files = output::write_report(&plan.out, plan.format, &report)?;
    let manifest = SweepManifest {
        command: plan.command.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: plan.section.clone(),
        seed: plan.seed,
        format: plan.format,
        seed_rule: output::SEED_RULE.to_string(),
        cell_count: report.cell_count,
        summary: report.summary.clone(),
        threads: pool.current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: files.iter().map(|p| p.display().to_string()).collect(),
    };
    let mpath = output::manifest_path(&plan.out);
    manifest.write(&mpath)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", mpath.display());
    if !report.summary.is_null() {
        println!("summary: {}", report.summary);
    }
    Ok(())
}

fn cli_command() -> clap::Command {
    let mut cmd = Cli::command().after_long_help(config::describe("run", config::RUN_KEYS));
    for (name, keys) in config::COMMANDS {
        cmd = cmd.mut_subcommand(*name, |s| s.after_long_help(config::describe(name, keys)));
    }
    cmd
}

fn main() -> ExitCode {
    let matches = cli_command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let plan = match &cli.command {
        Cmd::Rerun { manifest } => plan_from_manifest(&cli.global, manifest),
        other => plan_from_config(&cli.global, other.name()),
    };
    match plan.and_then(|p| execute(&p)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cftdrive: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
