//! The `zaps` command line: one-shot protocol runs, swarm simulation,
//! privacy attacks, overhead audits and micro-benchmarks. Every run writes
//! its outputs plus a manifest that `zaps replay` can re-execute.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

pub use error::CliError;
pub use manifest::{OutputFile, RunManifest};

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "ZAPS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "zaps-out";

#[derive(Debug, Parser)]
#[command(name = "zaps", version, about = "Privacy-preserving UAV authentication: runs, simulations and audits")]
pub struct Cli {
    /// JSON file with one object per command name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One honest three-party session.
    Session(commands::session::Flags),
    /// Swarm scalability sweep.
    Simulate(commands::simulate::Flags),
    /// Privacy attacks on synthetic traces.
    Attack(commands::attack::Flags),
    /// Per-message byte accounting.
    Overhead(commands::overhead::Flags),
    /// Timings of the primitive operations.
    Bench(commands::bench::Flags),
    /// Re-runs a manifest and compares output digests.
    Replay(commands::replay::Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Session(_) => "session",
            Command::Simulate(_) => "simulate",
            Command::Attack(_) => "attack",
            Command::Overhead(_) => "overhead",
            Command::Bench(_) => "bench",
            Command::Replay(_) => "replay",
        }
    }

    /// Effective configuration as JSON.
    pub fn resolve(&self, file: Option<&Path>) -> Result<Value, CliError> {
        use commands::*;
        let name = self.name();
        match self {
            Command::Session(f) => snapshot(config::resolve::<session::Config>(file, name, f)?),
            Command::Simulate(f) => snapshot(config::resolve::<simulate::Config>(file, name, f)?),
            Command::Attack(f) => snapshot(config::resolve::<attack::Config>(file, name, f)?),
            Command::Overhead(f) => snapshot(config::resolve::<overhead::Config>(file, name, f)?),
            Command::Bench(f) => snapshot(config::resolve::<bench::Config>(file, name, f)?),
            Command::Replay(f) => snapshot(config::resolve::<replay::Config>(file, name, f)?),
        }
    }
}

fn snapshot(c: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(c).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Protocol or assertion failure, with a short reason.
    Failure(String),
}

/// What a command produced, before anything is written.
#[derive(Clone, Debug)]
pub struct Report {
    pub files: Vec<OutputFile>,
    pub stdout: String,
    pub status: Status,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Success => 0,
            Status::Failure(_) => 1,
        }
    }
}

/// Runs `command` with a resolved configuration.
pub fn execute(command: &str, config: &Value) -> Result<Report, CliError> {
    use commands::*;
    fn parse<C: serde::de::DeserializeOwned>(config: &Value) -> Result<C, CliError> {
        serde_json::from_value(config.clone()).map_err(|e| CliError::Usage(e.to_string()))
    }
    match command {
        "session" => session::run(&parse(config)?),
        "simulate" => simulate::run(&parse(config)?),
        "attack" => attack::run(&parse(config)?),
        "overhead" => overhead::run(&parse(config)?),
        "bench" => bench::run(&parse(config)?),
        "replay" => replay::run(&parse(config)?),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

pub fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from)
}

/// Executes and writes outputs plus manifest into `dir`.
pub fn run_recorded(command: &str, config: Value, dir: &Path) -> Result<(Report, RunManifest), CliError> {
    let started = manifest::unix_ms();
    let report = execute(command, &config)?;
    let mut m = RunManifest {
        command: command.into(),
        seed: config.get("seed").and_then(Value::as_u64).unwrap_or(0),
        config,
        version: env!("CARGO_PKG_VERSION").into(),
        outputs: Vec::new(),
        exit_code: report.exit_code(),
        started_unix_ms: started,
        finished_unix_ms: 0,
    };
    m.finished_unix_ms = manifest::unix_ms();
    manifest::write_run(dir, &mut m, &report.files)?;
    Ok((report, m))
}

/// Process entry point. Returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = cli
        .command
        .resolve(cli.config.as_deref())
        .and_then(|cfg| run_recorded(cli.command.name(), cfg, &out_dir()));
    match result {
        Ok((report, _)) => {
            print!("{}", report.stdout);
            if let Status::Failure(reason) = &report.status {
                eprintln!("zaps {}: {reason}", cli.command.name());
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("zaps: {e}");
            e.exit_code()
        }
    }
}
