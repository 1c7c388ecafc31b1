//! Byte accounting of one honest session, checked against the layout totals.

use std::fmt::Write;

use clap::Args;
use serde::{Deserialize, Serialize};
use zaps_core::protocol::{enroll_pair, honest_run, random_route, run_honest_session, standard_fence, Authority};
use zaps_core::rng::sub_rng;
use zaps_core::snark::Backend;
use zaps_core::wire::{overhead_report, MsgKind, OverheadReport, ALIAS_BYTES, AUTH_BYTES, DIGEST_BYTES};

use super::{backends, to_json};
use crate::error::CliError;
use crate::manifest::OutputFile;
use crate::{Report, Status};

pub const EXPECTED_INIT: usize = 480;
pub const EXPECTED_PROOF: usize = 916;
pub const EXPECTED_TOTAL: usize = 1396;

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// schnorr, qap or both.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub backend: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            backend: "both".into(),
        }
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    expected: usize,
    measured: usize,
    ok: bool,
}

#[derive(Serialize)]
struct BackendResult {
    backend: Backend,
    confirmed: bool,
    report: OverheadReport,
    checks: Vec<Check>,
}

fn measure(seed: u64, backend: Backend) -> Result<(bool, OverheadReport), CliError> {
    let auth = Authority::standard(seed, backend);
    let (u, d) = enroll_pair(&auth, seed, 0).map_err(|e| CliError::Run(e.to_string()))?;
    let route = random_route(&mut sub_rng(seed, "overhead/route"), &standard_fence(), 5);
    let mut run = honest_run(&auth, u, d, &route, false, sub_rng(seed, "overhead/run"));
    let t = run_honest_session(&mut run, 0, 20_000);
    Ok((run.outcome().is_confirmed(), overhead_report(&t.sizes())))
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let mut results = Vec::new();
    for backend in backends(&cfg.backend)? {
        let (confirmed, report) = measure(cfg.seed, backend)?;
        let msg8 = report.messages.iter().filter(|m| m.kind == MsgKind::Msg8).map(|m| m.bytes).sum();
        let check = |name, expected, measured| Check {
            name,
            expected,
            measured,
            ok: expected == measured,
        };
        let checks = vec![
            check("init_subtotal", EXPECTED_INIT, report.init_bytes),
            check("proof_subtotal", EXPECTED_PROOF, report.proof_bytes),
            check("total", EXPECTED_TOTAL, report.total_bytes),
            check("msg8", ALIAS_BYTES + AUTH_BYTES + DIGEST_BYTES, msg8),
            check("messages", 8, report.messages.len()),
        ];
        results.push(BackendResult {
            backend,
            confirmed,
            report,
            checks,
        });
    }

    let mut out = String::new();
    for r in &results {
        writeln!(out, "{}", r.backend).unwrap();
        writeln!(out, "  {:<16} {:>5} {:>6}", "message", "phase", "bytes").unwrap();
        for m in &r.report.messages {
            let phase = format!("{:?}", m.kind.phase()).to_lowercase();
            writeln!(out, "  {:<16} {phase:>5} {:>6}", m.kind.to_string(), m.bytes).unwrap();
        }
        for c in &r.checks {
            let mark = if c.ok { "ok" } else { "MISMATCH" };
            writeln!(out, "  {:<16} {:>5} {:>6}  expected {:>5}  {mark}", c.name, "", c.measured, c.expected).unwrap();
        }
    }
    let failed: Vec<String> = results
        .iter()
        .flat_map(|r| {
            let mut v: Vec<String> = r.checks.iter().filter(|c| !c.ok).map(|c| format!("{} {}", r.backend, c.name)).collect();
            if !r.confirmed {
                v.push(format!("{} session not confirmed", r.backend));
            }
            v
        })
        .collect();
    let status = if failed.is_empty() {
        Status::Success
    } else {
        Status::Failure(format!("overhead mismatch: {}", failed.join(", ")))
    };
    Ok(Report {
        files: vec![
            OutputFile::new("overhead.csv", results[0].report.to_csv()),
            OutputFile::new("overhead.json", to_json(&results)),
        ],
        stdout: out,
        status,
    })
}
