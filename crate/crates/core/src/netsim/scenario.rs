//! Single-session attack scenarios over a recorded honest run.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adversary::{Adversary, AdversaryKind, MitmMode, Origin, PublicView};
use crate::arith::{CurvePoint, Scalar};
use crate::kex::ecdh;
use crate::protocol::tokens::{self, digest, mac};
use crate::protocol::{
    enroll_pair, honest_run, random_route, standard_fence, Authority, Envelope, ProtocolError, Role, SessionOutcome,
    SessionRun, Transcript,
};
use crate::rng::{sub_rng, sub_seed};
use crate::snark::{Backend, PROOF_BYTES};
use crate::wire::{decode, encode, Msg1, MsgKind, WireMessage};

/// Per-hop latency of the scenario driver, µs.
pub const HOP_US: u64 = 20_000;
/// Virtual start time of recorded sessions, µs.
pub const START_US: u64 = 5_000_000;

type Verdict = Result<(), (Role, ProtocolError)>;

/// State just before one delivery of the honest run.
#[derive(Clone)]
pub struct Snapshot {
    pub time_us: u64,
    pub env: Envelope,
    pub run: SessionRun,
    /// Envelopes in flight at that moment, excluding `env`.
    pub pending: Vec<(u64, Envelope)>,
}

pub struct RecordedSession {
    pub authority: Authority,
    pub snapshots: Vec<Snapshot>,
    pub final_run: SessionRun,
    pub transcript: Transcript,
}

impl RecordedSession {
    pub fn outcome(&self) -> &SessionOutcome {
        self.final_run.outcome()
    }

    /// Index of the first delivery of `kind`.
    pub fn index_of(&self, kind: MsgKind) -> Option<usize> {
        self.snapshots.iter().position(|s| s.env.kind == kind)
    }
}

fn pop_earliest(queue: &mut Vec<(u64, Envelope)>) -> Option<(u64, Envelope)> {
    let i = (0..queue.len()).min_by_key(|&i| queue[i].0)?;
    Some(queue.remove(i))
}

/// Delivers everything in `queue` and whatever it triggers. Returns the
/// first rejection seen.
fn settle(run: &mut SessionRun, mut queue: Vec<(u64, Envelope)>) -> Option<(Role, ProtocolError)> {
    let mut first = None;
    while let Some((t, env)) = pop_earliest(&mut queue) {
        let d = run.deliver_verdict(&env, t);
        if let (Err(e), None) = (d.verdict, &first) {
            first = Some(e);
        }
        queue.extend(d.replies.into_iter().map(|e| (t + HOP_US, e)));
    }
    first
}

/// Runs one honest session over a fixed-latency channel and keeps a
/// snapshot before every delivery.
pub fn record_honest(seed: u64, backend: Backend, route_len: usize, per_waypoint: bool) -> RecordedSession {
    let authority = Authority::standard(sub_seed(seed, "scenario/authority"), backend);
    let (user, drone) = enroll_pair(&authority, seed, 0).expect("fresh enrollment");
    let route = random_route(&mut sub_rng(seed, "scenario/route"), &standard_fence(), route_len);
    let mut run = honest_run(&authority, user, drone, &route, per_waypoint, sub_rng(seed, "scenario/run"));
    let mut queue: Vec<(u64, Envelope)> = run.start(START_US).into_iter().map(|e| (START_US + HOP_US, e)).collect();
    let mut snapshots = Vec::new();
    let mut transcript = Transcript::default();
    while let Some((t, env)) = pop_earliest(&mut queue) {
        snapshots.push(Snapshot {
            time_us: t,
            env: env.clone(),
            run: run.fork(),
            pending: queue.clone(),
        });
        let out = run.deliver(&env, t);
        transcript.entries.push((t, env));
        queue.extend(out.into_iter().map(|e| (t + HOP_US, e)));
    }
    RecordedSession {
        authority,
        snapshots,
        final_run: run,
        transcript,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    /// The original is withheld and delivered late.
    Delayed,
    /// A copy reaches the receiver after the session completed.
    AfterCompletion,
    /// Msg1 and Msg2 are replayed to a new server session.
    FreshServer,
}

/// Re-delivers message `index` of the trace `delay_us` after its original
/// delivery time and reports the first rejection, if any.
pub fn inject_replay(rec: &RecordedSession, index: usize, delay_us: u64, mode: ReplayMode) -> Verdict {
    let snap = &rec.snapshots[index];
    let at = snap.time_us + delay_us;
    match mode {
        ReplayMode::Delayed => {
            let mut run = snap.run.fork();
            let mut queue = snap.pending.clone();
            queue.push((at, snap.env.clone()));
            settle(&mut run, queue).map_or(Ok(()), Err)
        }
        ReplayMode::AfterCompletion => {
            let mut run = rec.final_run.fork();
            run.deliver_verdict(&snap.env, at).verdict
        }
        ReplayMode::FreshServer => {
            let done = rec.final_run.fork();
            let mission = *done.user.mission().expect("mission assigned");
            let path = done.user_path.clone();
            let (user, drone, _) = done.into_parties();
            let mut server = rec.authority.server_session();
            server.nonces = user.nonces.clone();
            let mut run = SessionRun::new(
                user,
                drone,
                server,
                mission,
                [path.clone(), path.clone(), path],
                sub_rng(index as u64, "scenario/fresh-server"),
            );
            let mut queue = Vec::new();
            for kind in [MsgKind::Msg1, MsgKind::Msg2] {
                let i = rec.index_of(kind).expect("init messages recorded");
                queue.push((rec.snapshots[i].time_us + delay_us, rec.snapshots[i].env.clone()));
            }
            settle(&mut run, queue).map_or(Ok(()), Err)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperSweep {
    /// Every bit of every message.
    Exhaustive,
    /// Every bit of every proof envelope.
    ProofBytes,
    /// No flip.
    Control,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperReport {
    pub trials: usize,
    /// Trials whose session did not confirm.
    pub rejected: usize,
    /// Rejections raised by the addressee of the flipped message.
    pub rejected_by_addressee: usize,
    pub confirmed: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl TamperReport {
    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / self.trials.max(1) as f64
    }

    /// Most frequent rejection reason.
    pub fn dominant_reason(&self) -> Option<&str> {
        self.reasons.iter().max_by_key(|(_, c)| **c).map(|(r, _)| r.as_str())
    }
}

/// Flips single bits of the recorded messages, one trial per bit, and
/// finishes each session from the snapshot.
pub fn inject_tamper(rec: &RecordedSession, sweep: TamperSweep) -> TamperReport {
    let mut report = TamperReport::default();
    let trial = |report: &mut TamperReport, snap: &Snapshot, bit: Option<usize>| {
        let mut env = snap.env.clone();
        if let Some(b) = bit {
            env.bytes[b / 8] ^= 0x80 >> (b % 8);
        }
        let mut run = snap.run.fork();
        let mut queue = snap.pending.clone();
        queue.push((snap.time_us, env));
        let first = settle(&mut run, queue);
        report.trials += 1;
        if run.outcome().is_confirmed() {
            report.confirmed += 1;
            return;
        }
        report.rejected += 1;
        let reason = match &first {
            Some((role, e)) => {
                if *role == snap.env.to {
                    report.rejected_by_addressee += 1;
                }
                e.reason()
            }
            None => "stalled",
        };
        *report.reasons.entry(reason.to_string()).or_default() += 1;
    };
    match sweep {
        TamperSweep::Control => trial(&mut report, &rec.snapshots[0], None),
        TamperSweep::Exhaustive => {
            for snap in &rec.snapshots {
                for b in 0..snap.env.bytes.len() * 8 {
                    trial(&mut report, snap, Some(b));
                }
            }
        }
        TamperSweep::ProofBytes => {
            for snap in &rec.snapshots {
                if let Some(off) = snap.env.kind.proof_offset() {
                    for b in off * 8..(off + PROOF_BYTES) * 8 {
                        trial(&mut report, snap, Some(b));
                    }
                }
            }
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MitmOutcome {
    pub outcome: SessionOutcome,
    /// The session confirmed with a key the adversary can compute.
    pub confirmed_with_known_key: bool,
    /// Adversarial envelopes a receiver accepted.
    pub forged_accepted: usize,
}

fn drive_attacked(run: &mut SessionRun, adversary: &mut Adversary) -> MitmOutcome {
    adversary.begin_session();
    let mut queue: Vec<(u64, Envelope, Origin)> = Vec::new();
    let enqueue = |queue: &mut Vec<(u64, Envelope, Origin)>, adv: &mut Adversary, batch: Vec<Envelope>, t: u64| {
        if batch.is_empty() {
            return;
        }
        let (out, _) = adv.intercept(batch, t);
        for em in out {
            queue.push((t + HOP_US + em.extra_delay_us, em.env, em.origin));
        }
    };
    let first = run.start(START_US);
    enqueue(&mut queue, adversary, first, START_US);
    let mut forged_accepted = 0;
    let mut buffered = 0;
    while let Some(i) = (0..queue.len()).min_by_key(|&i| queue[i].0) {
        let (t, env, origin) = queue.remove(i);
        let d = run.deliver_verdict(&env, t);
        if origin != Origin::Honest && d.verdict.is_ok() {
            if d.buffered {
                buffered += 1;
            } else {
                forged_accepted += 1;
            }
        }
        enqueue(&mut queue, adversary, d.replies, t);
    }
    if run.outcome().is_confirmed() {
        forged_accepted += buffered;
    }
    let confirmed_with_known_key =
        run.outcome().is_confirmed() && run.user.session_key().is_some_and(|k| adversary.knows_key(k));
    MitmOutcome {
        outcome: run.outcome().clone(),
        confirmed_with_known_key,
        forged_accepted,
    }
}

fn scenario_run(seed: u64, backend: Backend) -> (Authority, SessionRun) {
    let authority = Authority::standard(sub_seed(seed, "scenario/authority"), backend);
    let (user, drone) = enroll_pair(&authority, seed, 0).expect("fresh enrollment");
    let route = random_route(&mut sub_rng(seed, "scenario/route"), &standard_fence(), 5);
    let run = honest_run(&authority, user, drone, &route, false, sub_rng(seed, "scenario/run"));
    (authority, run)
}

/// One session under a man-in-the-middle without long-term secrets.
pub fn inject_mitm(seed: u64, backend: Backend, mode: MitmMode) -> MitmOutcome {
    let (authority, mut run) = scenario_run(seed, backend);
    let view = PublicView::of(&authority.params);
    let mut adv = Adversary::new(AdversaryKind::Mitm(mode), view, sub_rng(seed, "scenario/mitm"));
    drive_attacked(&mut run, &mut adv)
}

/// Key-compromise impersonation: with the drone's private key the
/// adversary substitutes the user's ephemeral towards the drone and forges
/// the server's tokens as far as that key allows.
pub fn key_compromise_attack(seed: u64, backend: Backend) -> MitmOutcome {
    let (authority, mut run) = scenario_run(seed, backend);
    let view = PublicView::of(&authority.params);
    let vd = *run.drone.long_term_secret().expect("registered drone");
    let mut adv = Adversary::key_compromise(view, vd, sub_rng(seed, "scenario/kci"));
    drive_attacked(&mut run, &mut adv)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionReport {
    /// Algebraic combinations of the colluders' knowledge tested as `V_u`.
    pub formulas_tried: usize,
    pub secret_recovered: bool,
    pub forgeries: usize,
    pub forgeries_accepted: usize,
    pub reasons: BTreeMap<String, usize>,
}

/// Drone and server pool their private keys and every transcript. They try
/// to derive the user's private key from that material with the group
/// operations, then to forge the user's init token for a new session.
pub fn collusion_attack(seed: u64, backend: Backend, forgeries: usize) -> CollusionReport {
    let rec = record_honest(seed, backend, 5, false);
    let authority = &rec.authority;
    let curve = authority.params.curve;
    let (user, drone) = (&rec.final_run.user, &rec.final_run.drone);
    let p_u = *user.public_key().expect("registered user");
    let v_s = *authority.server_secret();
    let v_d = *drone.long_term_secret().expect("registered drone");
    let g = CurvePoint::generator(curve);

    let mut pool = vec![v_s, v_d];
    for (_, env) in &rec.transcript.entries {
        for chunk in env.bytes.chunks(32) {
            pool.push(Scalar::from_be_bytes_reduced(curve, chunk));
        }
    }
    let mut report = CollusionReport::default();
    let test = |report: &mut CollusionReport, s: Scalar| {
        report.formulas_tried += 1;
        if !s.is_zero() {
            let p = g.mul_vartime(&s);
            if p == p_u || p == -p_u {
                report.secret_recovered = true;
            }
        }
    };
    for &a in &pool {
        test(&mut report, a);
        for &b in &[v_s, v_d] {
            test(&mut report, a + b);
            test(&mut report, a - b);
            test(&mut report, b - a);
            test(&mut report, a * b);
            if let Some(bi) = b.invert() {
                test(&mut report, a * bi);
            }
            if let Some(ai) = a.invert() {
                test(&mut report, b * ai);
            }
        }
    }

    // Forging I_u. The shared point with the user is known through V_s;
    // the credential is guessed from public material.
    let m1_index = rec.index_of(MsgKind::Msg1).expect("recorded Msg1");
    let Ok(WireMessage::Msg1(observed)) = decode(&rec.snapshots[m1_index].env.bytes, MsgKind::Msg1) else {
        unreachable!("recorded Msg1 decodes")
    };
    let smk = ecdh(&v_s, &p_u).expect("valid user key");
    let mut rng = sub_rng(seed, "scenario/collusion");
    for i in 0..forgeries {
        let guess = match i % 4 {
            0 => digest(&[&observed.rid]),
            1 => digest(&[&observed.p_u]),
            2 => [0u8; 32],
            _ => digest(&[&observed.i_u, &i.to_be_bytes()]),
        };
        let k = tokens::master_key(Role::User, &smk, &guess);
        let mut salt = [0u8; 16];
        rng.fill(&mut salt);
        let t0 = crate::protocol::timestamp_from_micros(START_US + (i as u64 + 1) * 1_000_000);
        let tag = mac(b"zaps/i-u", &k, &[&salt, &observed.p_u, &observed.rid], t0);
        let mut i_u = [0u8; 32];
        i_u[..16].copy_from_slice(&salt);
        i_u[16..].copy_from_slice(&tag[..16]);
        let forged = Msg1 { i_u, ..observed };

        // The colluding drone contributes a genuine Msg2.
        let base = rec.final_run.fork();
        let mission = *base.user.mission().expect("mission assigned");
        let path = base.user_path.clone();
        let (u, mut d, _) = base.into_parties();
        d.new_session();
        let mut server = authority.server_session();
        server.nonces = u.nonces.clone();
        let mut run = SessionRun::new(u, d, server, mission, [path.clone(), path.clone(), path], sub_rng(seed, "c/run"));
        let now_us = START_US + (i as u64 + 1) * 1_000_000;
        let mut drng = sub_rng(seed.wrapping_add(i as u64), "scenario/collusion-drone");
        let Ok(m2) = crate::protocol::drone_begin_init(&mut run.drone, &mut drng, t0) else {
            continue;
        };
        let env = |m: WireMessage, from| Envelope {
            kind: m.kind(),
            round: 0,
            from,
            to: Role::Server,
            bytes: encode(&m),
        };
        report.forgeries += 1;
        let _ = run.deliver_verdict(&env(WireMessage::Msg1(forged), Role::User), now_us);
        let v = run.deliver_verdict(&env(WireMessage::Msg2(m2), Role::Drone), now_us).verdict;
        match v {
            Ok(()) => report.forgeries_accepted += 1,
            Err((_, e)) => *report.reasons.entry(e.reason().to_string()).or_default() += 1,
        }
    }
    report
}
