//! Metadata traces and the traffic-analysis attacks run against them.
//!
//! Traces come from real per-waypoint sessions. An observer sees only the
//! size and send time of each message, the proof bytes, and one token
//! field per session. Baseline mode rewrites the same sessions the way an
//! unprotected deployment would look: proofs unpadded, so sizes scale with
//! the route, and a static alias in place of the fresh nonce digest.

pub mod attacks;
pub mod ml;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::netsim::CostModel;
use crate::protocol::{drive, enroll_pair, honest_run, random_route, standard_fence, Authority};
use crate::rng::{sub_rng, sub_seed};
use crate::snark::{Backend, PROOF_BYTES, ROUTE_LENGTHS};
use crate::wire::{decode, MsgKind, WireMessage};

pub use attacks::{
    cluster_attack, evaluate, evaluate_seeds, linkability_attack, proof_distinguishability, proof_features,
    proof_samples, shuffle_labels, AttackKind, AttackReport, EvalParams, Metric, PrivacySummary, ProofSample,
};

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("need at least 2 UAVs and 2 sessions each, got {uavs} x {sessions}")]
    Counts { uavs: usize, sessions: usize },
    #[error("score and label lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("both classes must be present")]
    SingleClass,
    #[error("non-finite score")]
    NonFinite,
    #[error("need at least {needed} samples per fold split, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("no same-UAV pairs: every UAV needs at least 2 sessions")]
    InsufficientSessions,
    #[error("session failed: {0}")]
    Session(String),
    #[error("probability out of range: {0}")]
    Probability(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    Protected,
    Baseline,
}

impl TraceMode {
    pub fn label(self) -> &'static str {
        match self {
            TraceMode::Protected => "protected",
            TraceMode::Baseline => "baseline",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageMeta {
    pub kind: MsgKind,
    pub size: usize,
    pub time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    /// Ground truth, never part of the attacker's features.
    pub uav: usize,
    pub session: usize,
    pub route_len: usize,
    pub mode: TraceMode,
    pub messages: Vec<MessageMeta>,
    pub proofs: Vec<Vec<u8>>,
    pub token: [u8; 32],
}

/// Knobs of the trace generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub backend: Backend,
    /// Probability that a session flies the UAV's usual route length.
    pub affinity: f64,
    /// Range of the per-session mean link latency, ms. Drawn afresh for
    /// every session since the UAV's distance to the relay changes.
    pub latency_ms: (f64, f64),
    /// Per-message latency jitter as a fraction of the session mean.
    pub jitter: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            backend: Backend::Schnorr,
            affinity: 0.4,
            latency_ms: (5.0, 50.0),
            jitter: 0.9,
        }
    }
}

/// Leading token bytes exposed as features, two per feature.
pub const TOKEN_FEATURES: usize = 16;
/// Number of features in [`features`].
pub const TRACE_FEATURES: usize = 6 + TOKEN_FEATURES;

/// Message count, total bytes, inter-arrival mean and variance, size mean
/// and variance, then the token's leading bytes as values in [0, 1).
pub fn features(t: &SessionTrace) -> Vec<f64> {
    let sizes: Vec<f64> = t.messages.iter().map(|m| m.size as f64).collect();
    let gaps: Vec<f64> = t.messages.windows(2).map(|w| w[1].time_ms - w[0].time_ms).collect();
    let mut f = vec![
        t.messages.len() as f64,
        sizes.iter().sum(),
        crate::stats::mean(&gaps),
        crate::stats::variance(&gaps),
        crate::stats::mean(&sizes),
        crate::stats::variance(&sizes),
    ];
    f.extend(
        t.token
            .chunks(2)
            .take(TOKEN_FEATURES)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65536.0),
    );
    f
}

pub fn gen_traces(mode: TraceMode, n_uavs: usize, sessions: usize, seed: u64) -> Result<Vec<SessionTrace>, PrivacyError> {
    gen_traces_with(mode, n_uavs, sessions, seed, &TraceConfig::default())
}

pub fn gen_traces_with(
    mode: TraceMode,
    n_uavs: usize,
    sessions: usize,
    seed: u64,
    cfg: &TraceConfig,
) -> Result<Vec<SessionTrace>, PrivacyError> {
    let traces = protected_traces(n_uavs, sessions, seed, cfg)?;
    Ok(match mode {
        TraceMode::Protected => traces,
        TraceMode::Baseline => traces.iter().map(to_baseline).collect(),
    })
}

/// Runs the sessions once and returns both views of them.
pub fn gen_trace_pair(
    n_uavs: usize,
    sessions: usize,
    seed: u64,
    cfg: &TraceConfig,
) -> Result<(Vec<SessionTrace>, Vec<SessionTrace>), PrivacyError> {
    let protected = protected_traces(n_uavs, sessions, seed, cfg)?;
    let baseline = protected.iter().map(to_baseline).collect();
    Ok((protected, baseline))
}

const SESSION_GAP_US: u64 = 60_000_000;
const HOP_US: u64 = 20_000;

fn protected_traces(n_uavs: usize, sessions: usize, seed: u64, cfg: &TraceConfig) -> Result<Vec<SessionTrace>, PrivacyError> {
    if n_uavs < 2 || sessions < 2 {
        return Err(PrivacyError::Counts { uavs: n_uavs, sessions });
    }
    if !(0.0..=1.0).contains(&cfg.affinity) {
        return Err(PrivacyError::Probability(cfg.affinity));
    }
    let authority = Authority::standard(sub_seed(seed, "privacy/authority"), cfg.backend);
    let cost = CostModel::pinned(cfg.backend);
    let fence = standard_fence();
    let mut out = Vec::with_capacity(n_uavs * sessions);
    for uav in 0..n_uavs {
        let (mut user, mut drone) =
            enroll_pair(&authority, seed, uav as u64).map_err(|e| PrivacyError::Session(e.to_string()))?;
        let mut profile = sub_rng(seed, &format!("privacy/profile/{uav}"));
        let home = ROUTE_LENGTHS[profile.gen_range(0..ROUTE_LENGTHS.len())];
        for session in 0..sessions {
            let mut rng = sub_rng(seed, &format!("privacy/session/{uav}/{session}"));
            let route_len = if rng.gen_bool(cfg.affinity) {
                home
            } else {
                ROUTE_LENGTHS[rng.gen_range(0..ROUTE_LENGTHS.len())]
            };
            let route = random_route(&mut rng, &fence, route_len);
            let latency = rng.gen_range(cfg.latency_ms.0..=cfg.latency_ms.1);
            user.new_session();
            drone.new_session();
            let mut run = honest_run(
                &authority,
                user,
                drone,
                &route,
                true,
                sub_rng(seed, &format!("privacy/run/{uav}/{session}")),
            );
            let start = (session as u64 + 1) * SESSION_GAP_US;
            let transcript = drive(&mut run, start, HOP_US, |_, _| {});
            if !run.outcome().is_confirmed() {
                return Err(PrivacyError::Session(run.outcome().reason().to_string()));
            }
            let mut messages = Vec::with_capacity(transcript.entries.len());
            let mut proofs = Vec::new();
            let mut token = [0u8; 32];
            let mut clock = 0.0;
            for (_, env) in &transcript.entries {
                let delay = latency * (1.0 + cfg.jitter * rng.gen_range(-0.5..=0.5));
                clock += delay.max(0.0);
                messages.push(MessageMeta {
                    kind: env.kind,
                    size: env.bytes.len(),
                    time_ms: clock,
                });
                clock += cost.receive(env.kind) as f64 / 1000.0;
                if let Some(off) = env.kind.proof_offset() {
                    proofs.push(env.bytes[off..off + PROOF_BYTES].to_vec());
                }
                if env.kind == MsgKind::Msg1 {
                    if let Ok(WireMessage::Msg1(m)) = decode(&env.bytes, MsgKind::Msg1) {
                        token = m.i_u;
                    }
                }
            }
            out.push(SessionTrace {
                uav,
                session,
                route_len,
                mode: TraceMode::Protected,
                messages,
                proofs,
                token,
            });
            (user, drone, _) = run.into_parties();
        }
    }
    Ok(out)
}

/// Unpadded proof length for a route of `n` waypoints.
pub fn baseline_proof_len(n: usize) -> usize {
    32 * n
}

fn expand(seed: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut ctr = 0u32;
    while out.len() < len {
        out.extend_from_slice(&Sha256::new().chain_update(seed).chain_update(ctr.to_be_bytes()).finalize());
        ctr += 1;
    }
    out.truncate(len);
    out
}

fn to_baseline(t: &SessionTrace) -> SessionTrace {
    let plen = baseline_proof_len(t.route_len);
    let messages = t
        .messages
        .iter()
        .map(|m| MessageMeta {
            size: if m.kind.proof_offset().is_some() { m.size - PROOF_BYTES + plen } else { m.size },
            ..*m
        })
        .collect();
    let proofs = t.proofs.iter().map(|p| expand(p, plen)).collect();
    let alias = Sha256::new()
        .chain_update(b"static-alias")
        .chain_update((t.uav as u64).to_be_bytes())
        .finalize();
    SessionTrace {
        mode: TraceMode::Baseline,
        messages,
        proofs,
        token: alias.into(),
        ..t.clone()
    }
}
