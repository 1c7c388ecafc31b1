//! Re-executes a recorded run and compares output digests.

use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::to_json;
use crate::error::CliError;
use crate::manifest::{sha256_hex, OutputFile, RunManifest};
use crate::{execute, Report, Status};

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    /// Path to a `<command>.manifest.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct FileCheck {
    path: String,
    reproducible: bool,
    recorded: String,
    replayed: Option<String>,
    matches: bool,
}

#[derive(Serialize)]
struct Outcome {
    command: String,
    files: Vec<FileCheck>,
    recorded_exit_code: i32,
    replayed_exit_code: i32,
    reproduced: bool,
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    if cfg.manifest.as_os_str().is_empty() {
        return Err(CliError::Usage("replay needs a manifest path".into()));
    }
    let m = RunManifest::load(&cfg.manifest)?;
    let replay = execute(&m.command, &m.config)?;
    let mut files = Vec::new();
    for o in &m.outputs {
        let replayed = replay.files.iter().find(|f| f.name == o.path).map(|f| sha256_hex(&f.bytes));
        files.push(FileCheck {
            path: o.path.clone(),
            reproducible: o.reproducible,
            matches: !o.reproducible || replayed.as_deref() == Some(o.sha256.as_str()),
            recorded: o.sha256.clone(),
            replayed,
        });
    }
    let extra = replay.files.iter().filter(|f| !m.outputs.iter().any(|o| o.path == f.name));
    let mut mismatched: Vec<String> = files.iter().filter(|f| !f.matches).map(|f| f.path.clone()).collect();
    mismatched.extend(extra.map(|f| f.name.clone()));
    // Exit codes of timing runs depend on the machine.
    let exit_matters = m.outputs.iter().all(|o| o.reproducible);
    if exit_matters && replay.exit_code() != m.exit_code {
        mismatched.push("exit_code".into());
    }
    let outcome = Outcome {
        command: m.command.clone(),
        recorded_exit_code: m.exit_code,
        replayed_exit_code: replay.exit_code(),
        reproduced: mismatched.is_empty(),
        files,
    };
    let mut out = String::new();
    for f in &outcome.files {
        let mark = match (f.reproducible, f.matches) {
            (false, _) => "timing, not compared",
            (true, true) => "identical",
            (true, false) => "DIFFERS",
        };
        writeln!(out, "{:<28} {mark}", f.path).unwrap();
    }
    let status = if mismatched.is_empty() {
        Status::Success
    } else {
        Status::Failure(format!("not reproduced: {}", mismatched.join(", ")))
    };
    Ok(Report {
        files: vec![OutputFile::new("replay.json", to_json(&outcome))],
        stdout: out,
        status,
    })
}
