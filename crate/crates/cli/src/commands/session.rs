//! One honest session between a freshly enrolled user, drone and server.

use std::collections::BTreeMap;
use std::fmt::Write;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zaps_core::arith::secp256k1;
use zaps_core::protocol::{enroll_pair, honest_run, random_route, standard_fence, Authority, Envelope, Role, SessionOutcome};
use zaps_core::rng::sub_rng;
use zaps_core::snark::{Backend, ROUTE_LENGTHS};
use zaps_core::wire::{overhead_report, MsgKind};

use super::{csv_bytes, to_json};
use crate::error::CliError;
use crate::manifest::OutputFile;
use crate::{Report, Status};

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// schnorr or qap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Freshness window in seconds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<u32>,
    /// Waypoints: 5, 8, 10 or 15.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route_len: Option<usize>,
    /// One proof round per waypoint.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_waypoint: Option<bool>,
    /// Per-hop channel latency in ms.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub backend: Backend,
    pub delta_t: u32,
    pub route_len: usize,
    pub per_waypoint: bool,
    pub hop_ms: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 7,
            backend: Backend::Schnorr,
            delta_t: zaps_core::protocol::DEFAULT_DELTA_T,
            route_len: 5,
            per_waypoint: false,
            hop_ms: 20,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    backend: Backend,
    outcome: &'a str,
    failed_at: Option<Role>,
    error: Option<String>,
    messages: usize,
    init_bytes: usize,
    proof_bytes: usize,
    total_bytes: usize,
    keys_agree: bool,
    /// SHA-256 of the agreed session key.
    key_fingerprint: Option<String>,
    sizes: BTreeMap<String, usize>,
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    if !ROUTE_LENGTHS.contains(&cfg.route_len) {
        return Err(CliError::Usage(format!("route_len {} not in {ROUTE_LENGTHS:?}", cfg.route_len)));
    }
    let auth = Authority::setup(secp256k1(), cfg.backend, cfg.delta_t, cfg.seed, &mut sub_rng(cfg.seed, "authority"));
    let (u, d) = enroll_pair(&auth, cfg.seed, 0).map_err(|e| CliError::Run(e.to_string()))?;
    let route = random_route(&mut sub_rng(cfg.seed, "session/route"), &standard_fence(), cfg.route_len);
    let mut run = honest_run(&auth, u, d, &route, cfg.per_waypoint, sub_rng(cfg.seed, "session/run"));

    // Deliver in time order, one hop per message, and snapshot phases.
    let hop = cfg.hop_ms * 1000;
    let start = 1_000_000;
    let mut queue: Vec<(u64, Envelope)> = run.start(start).into_iter().map(|e| (start + hop, e)).collect();
    let mut rows = Vec::new();
    let mut log = String::new();
    let mut sizes = Vec::new();
    while !queue.is_empty() {
        let (t, env) = queue.remove(0);
        let d = run.deliver_verdict(&env, t);
        let verdict = match &d.verdict {
            Ok(()) if d.buffered => "buffered".to_string(),
            Ok(()) => "ok".to_string(),
            Err((_, e)) => e.reason().to_string(),
        };
        let phases = [&run.user, &run.drone, &run.server].map(|c| format!("{:?}", c.phase()));
        writeln!(
            log,
            "{:>8.3} ms  {:<5} r{} {:?}->{:?} {:>4} B  {verdict:<10} user={} drone={} server={}",
            (t - start) as f64 / 1000.0,
            env.kind.to_string(),
            env.round,
            env.from,
            env.to,
            env.bytes.len(),
            phases[0],
            phases[1],
            phases[2]
        )
        .unwrap();
        rows.push(vec![
            rows.len().to_string(),
            format!("{:.3}", (t - start) as f64 / 1000.0),
            env.kind.to_string(),
            env.round.to_string(),
            format!("{:?}", env.from),
            format!("{:?}", env.to),
            env.bytes.len().to_string(),
            verdict,
            phases[0].clone(),
            phases[1].clone(),
            phases[2].clone(),
            hex::encode(Sha256::digest(&env.bytes)),
        ]);
        sizes.push((env.kind, env.bytes.len()));
        queue.extend(d.replies.into_iter().map(|e| (t + hop, e)));
        queue.sort_by_key(|(t, _)| *t);
    }

    let report = overhead_report(&sizes);
    let keys: Vec<_> = [&run.user, &run.drone, &run.server].iter().map(|c| c.session_key().map(|k| k.key)).collect();
    let keys_agree = keys[0].is_some() && keys.iter().all(|k| *k == keys[0]);
    let outcome = run.outcome().clone();
    let (failed_at, error) = match &outcome {
        SessionOutcome::Failed { at, error } => (Some(*at), Some(error.to_string())),
        _ => (None, None),
    };
    let mut per_kind = BTreeMap::new();
    for k in MsgKind::ALL {
        per_kind.insert(k.to_string(), k.size());
    }
    let summary = Summary {
        seed: cfg.seed,
        backend: cfg.backend,
        outcome: outcome.reason(),
        failed_at,
        error,
        messages: sizes.len(),
        init_bytes: report.init_bytes,
        proof_bytes: report.proof_bytes,
        total_bytes: report.total_bytes,
        keys_agree,
        key_fingerprint: keys[0].filter(|_| keys_agree).map(|k| hex::encode(Sha256::digest(k))),
        sizes: per_kind,
    };
    writeln!(
        log,
        "outcome: {}  init {} B  proof {} B  total {} B",
        outcome.reason(),
        report.init_bytes,
        report.proof_bytes,
        report.total_bytes
    )
    .unwrap();

    let header = [
        "seq", "time_ms", "message", "round", "from", "to", "bytes", "verdict", "user_phase", "drone_phase",
        "server_phase", "sha256",
    ];
    let status = match &outcome {
        SessionOutcome::Confirmed if keys_agree => Status::Success,
        SessionOutcome::Confirmed => Status::Failure("session keys disagree".into()),
        SessionOutcome::Failed { at, error } => Status::Failure(format!("{} at {at:?}: {error}", error.reason())),
        SessionOutcome::InProgress => Status::Failure("session did not complete".into()),
    };
    Ok(Report {
        files: vec![
            OutputFile::new("session-transcript.csv", csv_bytes(&header, rows)?),
            OutputFile::new("session.json", to_json(&summary)),
        ],
        stdout: log,
        status,
    })
}
