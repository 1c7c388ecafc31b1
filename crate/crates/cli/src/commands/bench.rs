//! Wall-clock timings of the primitive operations per backend.

use std::fmt::Write;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use zaps_core::arith::{secp256k1, Scalar};
use zaps_core::kex::gen_keypair;
use zaps_core::protocol::{random_route, standard_fence, tokens, Authority, Role};
use zaps_core::rng::sub_rng;
use zaps_core::snark::pinocchio::gen_proof_blinded;
use zaps_core::snark::{commit, genproof, route_accumulator, schnorr_prove, schnorr_verify_recover, verproof, Backend};
use zaps_core::stats::median;

use super::{backends, csv_bytes, to_json};
use crate::error::CliError;
use crate::manifest::OutputFile;
use crate::{Report, Status};

pub const OPS: [&str; 5] = ["keygen", "commit", "prove", "verify", "token"];

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    /// Repetitions per operation; 0 writes only the header.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// schnorr, qap or both.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Waypoints in the benchmarked route.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reps: usize,
    pub backend: String,
    pub route_len: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            reps: 30,
            backend: "both".into(),
            route_len: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub backend: Backend,
    pub op: &'static str,
    pub reps: usize,
    pub median_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

#[derive(Serialize)]
struct Ordering {
    backend: Backend,
    prove_over_verify: f64,
    verify_over_token: f64,
    prove_gt_verify: bool,
    verify_gt_token: bool,
    verify_gt_keygen: bool,
}

#[derive(Serialize)]
struct Summary {
    reps: usize,
    orderings: Vec<Ordering>,
    schnorr_prove_faster_than_qap: Option<bool>,
}

fn time(reps: usize, mut f: impl FnMut()) -> Vec<f64> {
    f();
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e6
        })
        .collect()
}

/// Samples every operation `reps` times. Returns `(op, samples)` in [`OPS`] order.
pub fn measure(backend: Backend, reps: usize, route_len: usize, seed: u64) -> Result<Vec<(&'static str, Vec<f64>)>, CliError> {
    let curve = secp256k1();
    let mut rng = sub_rng(seed, "bench");
    let route = random_route(&mut rng, &standard_fence(), route_len);
    let run = |e: zaps_core::snark::SnarkError| CliError::Run(e.to_string());
    let keygen = time(reps, || {
        std::hint::black_box(gen_keypair(curve, &mut rng));
    });
    let mut rng = sub_rng(seed, "bench/proof");
    let (commit_t, prove_t, verify_t) = match backend {
        Backend::Schnorr => {
            let r = Scalar::random(curve, &mut rng);
            let c = commit(&route, &r).map_err(run)?;
            let proof = schnorr_prove(&c, &route, &r, b"bench", &mut rng).map_err(run)?;
            (
                time(reps, || {
                    std::hint::black_box(commit(&route, &r).unwrap());
                }),
                time(reps, || {
                    std::hint::black_box(schnorr_prove(&c, &route, &r, b"bench", &mut rng).unwrap());
                }),
                time(reps, || {
                    assert!(schnorr_verify_recover(curve, &proof, b"bench").is_some());
                }),
            )
        }
        Backend::Qap => {
            let auth = Authority::standard(seed, backend);
            let params = &auth.params;
            let keys = params.keyring.get(Role::User, route_len).map_err(|e| CliError::Run(e.to_string()))?;
            let circuit = params.circuit(standard_fence(), route_len).map_err(|e| CliError::Run(e.to_string()))?;
            let w = circuit.witness(&route).map_err(run)?;
            let x = circuit.statement(route_accumulator(&route));
            let proof = genproof(&keys.0, &x, &w).map_err(run)?;
            (
                time(reps, || {
                    let w = circuit.witness(&route).unwrap();
                    std::hint::black_box((w, circuit.statement(route_accumulator(&route))));
                }),
                time(reps, || {
                    std::hint::black_box(gen_proof_blinded(&keys.0, &x, &w, &mut rng).unwrap().to_envelope());
                }),
                time(reps, || {
                    assert!(verproof(&keys.1, &x, &proof));
                }),
            )
        }
    };
    let key = [7u8; 32];
    let field = [9u8; 32];
    let token = time(reps, || {
        std::hint::black_box(tokens::mac(b"bench", &key, &[&field, &field], 1));
    });
    Ok(vec![
        ("keygen", keygen),
        ("commit", commit_t),
        ("prove", prove_t),
        ("verify", verify_t),
        ("token", token),
    ])
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let mut timings = Vec::new();
    for backend in backends(&cfg.backend)? {
        if cfg.reps == 0 {
            continue;
        }
        for (op, samples) in measure(backend, cfg.reps, cfg.route_len, cfg.seed)? {
            let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let max = samples.iter().copied().fold(0.0, f64::max);
            timings.push(Timing {
                backend,
                op,
                reps: cfg.reps,
                median_us: median(&samples),
                min_us: min,
                max_us: max,
            });
        }
    }
    let get = |b: Backend, op: &str| timings.iter().find(|t| t.backend == b && t.op == op).map(|t| t.median_us);
    let mut orderings = Vec::new();
    let mut out = String::new();
    for t in &timings {
        writeln!(out, "{:<8} {:<7} median {:>10.2} us", t.backend, t.op, t.median_us).unwrap();
    }
    for b in [Backend::Schnorr, Backend::Qap] {
        let (Some(p), Some(v), Some(k), Some(t)) = (get(b, "prove"), get(b, "verify"), get(b, "keygen"), get(b, "token")) else {
            continue;
        };
        orderings.push(Ordering {
            backend: b,
            prove_over_verify: p / v,
            verify_over_token: v / t,
            prove_gt_verify: p > v,
            verify_gt_token: v > t,
            verify_gt_keygen: v > k,
        });
    }
    let schnorr_faster = get(Backend::Schnorr, "prove").zip(get(Backend::Qap, "prove")).map(|(s, q)| s < q);
    let broken: Vec<String> = orderings
        .iter()
        .filter(|o| !(o.prove_gt_verify && o.verify_gt_token))
        .map(|o| format!("{}: prove/verify {:.2}, verify/token {:.2}", o.backend, o.prove_over_verify, o.verify_over_token))
        .collect();
    let status = if broken.is_empty() {
        Status::Success
    } else {
        Status::Failure(format!("expected prove > verify > token; {}", broken.join("; ")))
    };
    let rows = timings.iter().map(|t| {
        vec![
            t.backend.to_string(),
            t.op.to_string(),
            t.reps.to_string(),
            format!("{:.3}", t.median_us),
            format!("{:.3}", t.min_us),
            format!("{:.3}", t.max_us),
        ]
    });
    let csv = csv_bytes(&["backend", "op", "reps", "median_us", "min_us", "max_us"], rows)?;
    let summary = Summary {
        reps: cfg.reps,
        orderings,
        schnorr_prove_faster_than_qap: schnorr_faster,
    };
    Ok(Report {
        files: vec![OutputFile::timing("bench.csv", csv), OutputFile::timing("bench-summary.json", to_json(&summary))],
        stdout: out,
        status,
    })
}
