//! Discrete-event simulation of many UAV sessions against one server.
//!
//! Each UAV runs sessions back to back with a random pause between them.
//! Messages cross a channel with bounded-uniform delay and Bernoulli loss.
//! The server is a single FIFO processor; user and drone devices each have
//! their own. Processing times come from a [`CostModel`] while the real
//! protocol code runs for every delivery, so outcomes are genuine and
//! timings are reproducible.

pub mod adversary;
pub mod cost;
pub mod scenario;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::{
    enroll_pair, honest_run, random_route, standard_fence, Authority, Envelope, Phase, Role, SessionContext,
    SessionOutcome, SessionRun, DEFAULT_DELTA_T,
};
use crate::rng::{sub_rng, sub_seed, SimRng};
use crate::snark::{Backend, ROUTE_LENGTHS};
use crate::stats::{linear_fit, LinearFit};
use crate::wire::MsgKind;

pub use adversary::{Adversary, AdversaryKind, Emission, MitmMode, Origin, PublicView, TamperPolicy};
pub use cost::CostModel;
pub use scenario::{
    collusion_attack, inject_mitm, inject_replay, inject_tamper, key_compromise_attack, record_honest,
    CollusionReport, MitmOutcome, RecordedSession, ReplayMode, TamperReport, TamperSweep,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("uav count {0} outside 1..=1000")]
    UavCount(usize),
    #[error("sessions per uav must be positive")]
    NoSessions,
    #[error("loss probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("delay bounds {0}..{1} ms are inverted")]
    DelayBounds(u64, u64),
    #[error("route length {0} not supported")]
    RouteLength(usize),
    #[error("route mix is empty")]
    EmptyRouteMix,
    #[error("cost model is for {0}, config uses {1}")]
    CostBackend(Backend, Backend),
    #[error("enrollment failed: {0}")]
    Enrollment(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub uavs: usize,
    pub sessions_per_uav: usize,
    pub seed: u64,
    /// Freshness window, seconds.
    pub delta_t: u32,
    /// Channel delay bounds, ms.
    pub delay_ms: (u64, u64),
    pub loss: f64,
    pub adversary: AdversaryKind,
    pub backend: Backend,
    pub route_mix: Vec<usize>,
    /// One proof round per waypoint instead of a single round.
    pub per_waypoint: bool,
    /// Pause before each session, uniform in `0..=think_ms`.
    pub think_ms: u64,
    /// Abort a session this long after a lost message, ms.
    pub timeout_ms: u64,
    pub cost: CostModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            uavs: 10,
            sessions_per_uav: 3,
            seed: 0,
            delta_t: DEFAULT_DELTA_T,
            delay_ms: (5, 50),
            loss: 0.0,
            adversary: AdversaryKind::None,
            backend: Backend::Schnorr,
            route_mix: ROUTE_LENGTHS.to_vec(),
            per_waypoint: false,
            think_ms: 500,
            timeout_ms: 3_000,
            cost: CostModel::pinned(Backend::Schnorr),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(1..=1000).contains(&self.uavs) {
            return Err(SimError::UavCount(self.uavs));
        }
        if self.sessions_per_uav == 0 {
            return Err(SimError::NoSessions);
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(SimError::Probability(self.loss));
        }
        if self.delay_ms.0 > self.delay_ms.1 {
            return Err(SimError::DelayBounds(self.delay_ms.0, self.delay_ms.1));
        }
        if self.route_mix.is_empty() {
            return Err(SimError::EmptyRouteMix);
        }
        if let Some(&n) = self.route_mix.iter().find(|n| !ROUTE_LENGTHS.contains(n)) {
            return Err(SimError::RouteLength(n));
        }
        if self.cost.backend != self.backend {
            return Err(SimError::CostBackend(self.cost.backend, self.backend));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Deliver,
    Drop,
    Inject,
    Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    /// Virtual time, µs.
    pub time_us: u64,
    pub seq: u64,
    pub kind: EventKind,
    pub uav: usize,
    pub session: usize,
    pub message: Option<MsgKind>,
    pub round: usize,
    pub bytes: usize,
    /// Receiver verdict for deliveries, session outcome for ticks.
    pub note: String,
}

impl SimEvent {
    pub fn time_ms(&self) -> f64 {
        self.time_us as f64 / 1000.0
    }
}

/// Channel bookkeeping. Every honest emission ends up in exactly one of
/// `delivered`, `dropped` or `intercepted`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelCounts {
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub intercepted: u64,
    /// Replayed, forged or tampered envelopes put on the channel.
    pub injected: u64,
    pub injected_delivered: u64,
    pub injected_dropped: u64,
}

impl ChannelCounts {
    pub fn conserved(&self) -> bool {
        self.emitted == self.delivered + self.dropped + self.intercepted
            && self.injected == self.injected_delivered + self.injected_dropped
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryCounts {
    /// Adversarial envelopes a receiver accepted.
    pub accepted: u64,
    /// Adversarial envelopes rejected, by reason.
    pub rejected: BTreeMap<String, u64>,
    /// Sessions confirmed with a key the adversary can compute.
    pub compromised: u64,
    /// Confirmed sessions in which an adversarial envelope was accepted.
    pub confirmed_under_attack: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmMetrics {
    pub uavs: usize,
    pub seed: u64,
    pub sessions: usize,
    pub sessions_per_uav: usize,
    pub confirmed: usize,
    pub aborts: BTreeMap<String, usize>,
    /// Mean server handling time per confirmed session: queueing plus
    /// processing of every message the server received, ms.
    pub mean_handling_ms: f64,
    /// Proof-verification share of the handling time, ms.
    pub mean_verify_ms: f64,
    /// Remainder of the handling time, ms.
    pub mean_processing_ms: f64,
    pub bytes_total: u64,
    pub bytes_per_uav: f64,
    pub channel: ChannelCounts,
    pub adversary: AdversaryCounts,
    pub virtual_end_ms: f64,
    pub event_log_hash: String,
}

impl SwarmMetrics {
    pub fn success_rate(&self) -> f64 {
        self.confirmed as f64 / self.sessions.max(1) as f64
    }

    pub fn csv_header() -> &'static str {
        "uav_count,seed,sessions,confirmed,handling_ms,verify_ms,processing_ms,bytes_per_uav,bytes_total"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.1},{}",
            self.uavs,
            self.seed,
            self.sessions,
            self.confirmed,
            self.mean_handling_ms,
            self.mean_verify_ms,
            self.mean_processing_ms,
            self.bytes_per_uav,
            self.bytes_total
        )
    }
}

pub fn metrics_csv(rows: &[SwarmMetrics]) -> String {
    let mut s = String::from(SwarmMetrics::csv_header());
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn events_json(events: &[SimEvent]) -> String {
    serde_json::to_string_pretty(events).expect("events serialize")
}

#[derive(Debug)]
enum Pending {
    Tick { uav: usize },
    Arrive { uav: usize, session: usize, env: Envelope, origin: Origin },
    Timeout { uav: usize, session: usize },
}

struct Uav {
    run: Option<SessionRun>,
    idle: Option<(SessionContext, SessionContext)>,
    started: usize,
    session: usize,
    handling_us: u64,
    verify_us: u64,
    user_free: u64,
    drone_free: u64,
    bytes: u64,
    settled: bool,
    attacked: bool,
    /// Adversarial init messages stored by the server, judged when the
    /// session settles.
    adv_buffered: u64,
    channel: SimRng,
    adversary: Option<Adversary>,
}

#[derive(Default)]
struct Tally {
    confirmed: usize,
    aborts: BTreeMap<String, usize>,
    handling: Vec<f64>,
    verify: Vec<f64>,
    channel: ChannelCounts,
    adv: AdversaryCounts,
}

struct Swarm<'a> {
    cfg: &'a SimConfig,
    authority: Authority,
    queue: BTreeMap<(u64, u64), Pending>,
    seq: u64,
    server_free: u64,
    uavs: Vec<Uav>,
    tally: Tally,
    hasher: Sha256,
    events: Option<Vec<SimEvent>>,
    last_us: u64,
}

/// Runs the configured swarm.
pub fn run_swarm(cfg: &SimConfig) -> Result<SwarmMetrics, SimError> {
    run_swarm_logged(cfg, false).map(|(m, _)| m)
}

/// [`run_swarm`] that also returns the processed events when `keep_events`.
pub fn run_swarm_logged(cfg: &SimConfig, keep_events: bool) -> Result<(SwarmMetrics, Vec<SimEvent>), SimError> {
    cfg.validate()?;
    let authority = {
        let mut a = Authority::standard(sub_seed(cfg.seed, "authority"), cfg.backend);
        std::sync::Arc::get_mut(&mut a.params).expect("fresh params").delta_t = cfg.delta_t;
        a
    };
    let view = PublicView::of(&authority.params);
    let mut uavs = Vec::with_capacity(cfg.uavs);
    for i in 0..cfg.uavs {
        let (user, drone) =
            enroll_pair(&authority, cfg.seed, i as u64).map_err(|e| SimError::Enrollment(e.to_string()))?;
        let adversary = (cfg.adversary != AdversaryKind::None)
            .then(|| Adversary::new(cfg.adversary, view, sub_rng(cfg.seed, &format!("adversary/{i}"))));
        uavs.push(Uav {
            run: None,
            idle: Some((user, drone)),
            started: 0,
            session: 0,
            handling_us: 0,
            verify_us: 0,
            user_free: 0,
            drone_free: 0,
            bytes: 0,
            settled: true,
            attacked: false,
            adv_buffered: 0,
            channel: sub_rng(cfg.seed, &format!("channel/{i}")),
            adversary,
        });
    }
    let mut sim = Swarm {
        cfg,
        authority,
        queue: BTreeMap::new(),
        seq: 0,
        server_free: 0,
        uavs,
        tally: Tally::default(),
        hasher: Sha256::new(),
        events: keep_events.then(Vec::new),
        last_us: 0,
    };
    for i in 0..cfg.uavs {
        let mut arr = sub_rng(cfg.seed, &format!("arrival/{i}"));
        let t = arr.gen_range(0..=cfg.think_ms * 1000);
        sim.push(t, Pending::Tick { uav: i });
    }
    while let Some(((t, seq), ev)) = sim.queue.pop_first() {
        sim.last_us = t;
        sim.step(t, seq, ev);
    }
    let events = sim.events.take().unwrap_or_default();
    Ok((sim.finish(), events))
}

impl Swarm<'_> {
    fn push(&mut self, t: u64, ev: Pending) {
        self.queue.insert((t, self.seq), ev);
        self.seq += 1;
    }

    fn log(&mut self, ev: SimEvent) {
        let line = serde_json::to_string(&ev).expect("event serializes");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if let Some(evs) = self.events.as_mut() {
            evs.push(ev);
        }
    }

    fn step(&mut self, t: u64, seq: u64, ev: Pending) {
        match ev {
            Pending::Tick { uav } => self.tick(t, seq, uav),
            Pending::Arrive { uav, session, env, origin } => self.arrive(t, seq, uav, session, env, origin),
            Pending::Timeout { uav, session } => {
                if self.uavs[uav].session == session && !self.uavs[uav].settled {
                    self.settle(t, seq, uav, "timeout".into());
                }
            }
        }
    }

    fn tick(&mut self, t: u64, seq: u64, i: usize) {
        let cfg = self.cfg;
        let u = &mut self.uavs[i];
        let session = u.started;
        if session >= cfg.sessions_per_uav {
            return;
        }
        u.started += 1;
        let (mut user, mut drone) = match u.run.take() {
            Some(run) => {
                let (user, drone, _) = run.into_parties();
                (user, drone)
            }
            None => u.idle.take().expect("uav owns its contexts"),
        };
        user.new_session();
        drone.new_session();
        let mut rng = sub_rng(cfg.seed, &format!("route/{i}/{session}"));
        let n = cfg.route_mix[rng.gen_range(0..cfg.route_mix.len())];
        let route = random_route(&mut rng, &standard_fence(), n);
        let mut run = honest_run(
            &self.authority,
            user,
            drone,
            &route,
            cfg.per_waypoint,
            sub_rng(cfg.seed, &format!("session/{i}/{session}")),
        );
        u.session = session;
        u.handling_us = 0;
        u.verify_us = 0;
        u.settled = false;
        u.attacked = false;
        u.adv_buffered = 0;
        if let Some(a) = u.adversary.as_mut() {
            a.begin_session();
        }
        let done = t + cfg.cost.start_us;
        u.user_free = done;
        u.drone_free = done;
        let out = run.start(done);
        u.run = Some(run);
        self.log(SimEvent {
            time_us: t,
            seq,
            kind: EventKind::Tick,
            uav: i,
            session,
            message: None,
            round: 0,
            bytes: 0,
            note: format!("start n={n}"),
        });
        self.send(done, i, session, out);
        self.check_settled(done, seq, i);
    }

    /// Puts honest replies on the channel through the adversary.
    fn send(&mut self, t: u64, i: usize, session: usize, out: Vec<Envelope>) {
        if out.is_empty() {
            return;
        }
        let (delay, loss) = (self.cfg.delay_ms, self.cfg.loss);
        let u = &mut self.uavs[i];
        self.tally.channel.emitted += out.len() as u64;
        u.bytes += out.iter().map(|e| e.bytes.len() as u64).sum::<u64>();
        let (emissions, withheld) = match u.adversary.as_mut() {
            Some(a) => a.intercept(out, t),
            None => (
                out.into_iter()
                    .map(|env| Emission {
                        env,
                        origin: Origin::Honest,
                        extra_delay_us: 0,
                    })
                    .collect(),
                0,
            ),
        };
        self.tally.channel.intercepted += withheld as u64;
        for em in emissions {
            let u = &mut self.uavs[i];
            let lost = loss > 0.0 && u.channel.gen_bool(loss);
            let d = u.channel.gen_range(delay.0 * 1000..=delay.1 * 1000);
            let honest = em.origin == Origin::Honest;
            if !honest {
                self.tally.channel.injected += 1;
            }
            if lost {
                if honest {
                    self.tally.channel.dropped += 1;
                } else {
                    self.tally.channel.injected_dropped += 1;
                }
                self.log(SimEvent {
                    time_us: t,
                    seq: self.seq,
                    kind: EventKind::Drop,
                    uav: i,
                    session,
                    message: Some(em.env.kind),
                    round: em.env.round,
                    bytes: em.env.bytes.len(),
                    note: format!("{:?}", em.origin).to_lowercase(),
                });
                if honest {
                    let to = t + self.cfg.timeout_ms * 1000;
                    self.push(to, Pending::Timeout { uav: i, session });
                }
                continue;
            }
            self.push(
                t + d + em.extra_delay_us,
                Pending::Arrive {
                    uav: i,
                    session,
                    env: em.env,
                    origin: em.origin,
                },
            );
        }
    }

    fn arrive(&mut self, t: u64, seq: u64, i: usize, session: usize, env: Envelope, origin: Origin) {
        let cost = &self.cfg.cost;
        let c = cost.receive(env.kind);
        let u = &mut self.uavs[i];
        let done = match env.to {
            Role::Server => {
                let begin = self.server_free.max(t);
                let done = begin + c;
                self.server_free = done;
                if session == u.session && !u.settled {
                    u.handling_us += done - t;
                    u.verify_us += cost.verify(env.kind);
                }
                done
            }
            Role::User => {
                let done = u.user_free.max(t) + c;
                u.user_free = done;
                done
            }
            Role::Drone => {
                let done = u.drone_free.max(t) + c;
                u.drone_free = done;
                done
            }
        };
        let Some(run) = u.run.as_mut() else { return };
        let d = run.deliver_verdict(&env, done);
        let honest = origin == Origin::Honest;
        if honest {
            self.tally.channel.delivered += 1;
        } else {
            self.tally.channel.injected_delivered += 1;
            match &d.verdict {
                Ok(()) if d.buffered => u.adv_buffered += 1,
                Ok(()) => {
                    self.tally.adv.accepted += 1;
                    u.attacked = true;
                }
                Err((_, e)) => *self.tally.adv.rejected.entry(e.reason().to_string()).or_default() += 1,
            }
        }
        let note = match &d.verdict {
            Ok(()) => "ok".to_string(),
            Err((r, e)) => format!("{:?}:{}", r, e.reason()).to_lowercase(),
        };
        self.log(SimEvent {
            time_us: t,
            seq,
            kind: if honest { EventKind::Deliver } else { EventKind::Inject },
            uav: i,
            session,
            message: Some(env.kind),
            round: env.round,
            bytes: env.bytes.len(),
            note,
        });
        let current = self.uavs[i].session;
        self.send(done, i, current, d.replies);
        self.check_settled(done, seq, i);
    }

    fn check_settled(&mut self, t: u64, seq: u64, i: usize) {
        let u = &self.uavs[i];
        if u.settled {
            return;
        }
        let outcome = u.run.as_ref().map(|r| r.outcome().clone()).unwrap_or(SessionOutcome::InProgress);
        match outcome {
            SessionOutcome::InProgress => {}
            o => self.settle(t, seq, i, o.reason().to_string()),
        }
    }

    fn settle(&mut self, t: u64, seq: u64, i: usize, reason: String) {
        let think = self.cfg.think_ms * 1000;
        let u = &mut self.uavs[i];
        u.settled = true;
        let run = u.run.as_ref().expect("uav owns its run");
        let buffered = std::mem::take(&mut u.adv_buffered);
        if buffered > 0 {
            if reason == "confirmed" {
                self.tally.adv.accepted += buffered;
                u.attacked = true;
            } else {
                *self.tally.adv.rejected.entry(reason.clone()).or_default() += buffered;
            }
        }
        if reason == "confirmed" {
            self.tally.confirmed += 1;
            self.tally.handling.push(u.handling_us as f64 / 1000.0);
            self.tally.verify.push(u.verify_us as f64 / 1000.0);
            if let (Some(a), Some(k)) = (u.adversary.as_ref(), run.user.session_key()) {
                if a.knows_key(k) {
                    self.tally.adv.compromised += 1;
                }
            }
            if u.attacked {
                self.tally.adv.confirmed_under_attack += 1;
            }
            debug_assert!(run.user.phase() == Phase::Confirmed);
        } else {
            *self.tally.aborts.entry(reason.clone()).or_default() += 1;
        }
        let session = u.session;
        let pause = u.channel.gen_range(0..=think);
        self.log(SimEvent {
            time_us: t,
            seq,
            kind: EventKind::Tick,
            uav: i,
            session,
            message: None,
            round: 0,
            bytes: 0,
            note: reason,
        });
        self.push(t + pause, Pending::Tick { uav: i });
    }

    fn finish(self) -> SwarmMetrics {
        let n = self.cfg.uavs;
        let bytes_total: u64 = self.uavs.iter().map(|u| u.bytes).sum();
        let h = crate::stats::mean(&self.tally.handling);
        let v = crate::stats::mean(&self.tally.verify);
        SwarmMetrics {
            uavs: n,
            seed: self.cfg.seed,
            sessions: n * self.cfg.sessions_per_uav,
            sessions_per_uav: self.cfg.sessions_per_uav,
            confirmed: self.tally.confirmed,
            aborts: self.tally.aborts,
            mean_handling_ms: h,
            mean_verify_ms: v,
            mean_processing_ms: h - v,
            bytes_total,
            bytes_per_uav: bytes_total as f64 / n as f64,
            channel: self.tally.channel,
            adversary: self.tally.adv,
            virtual_end_ms: self.last_us as f64 / 1000.0,
            event_log_hash: hex::encode(self.hasher.finalize()),
        }
    }
}

/// Runs `base` once per UAV count and seed.
pub fn sweep_uavs(base: &SimConfig, counts: &[usize], seeds: &[u64]) -> Result<Vec<SwarmMetrics>, SimError> {
    let mut jobs = Vec::new();
    for &n in counts {
        for &s in seeds {
            jobs.push(SimConfig {
                uavs: n,
                seed: s,
                ..base.clone()
            });
        }
    }
    use rayon::prelude::*;
    jobs.par_iter().map(run_swarm).collect()
}

/// Mean handling time per UAV count, in ascending count order.
pub fn handling_curve(rows: &[SwarmMetrics]) -> Vec<(usize, f64)> {
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by.entry(r.uavs).or_default().push(r.mean_handling_ms);
    }
    by.into_iter().map(|(n, v)| (n, crate::stats::mean(&v))).collect()
}

/// Linear fit of handling time against UAV count.
pub fn handling_fit(curve: &[(usize, f64)]) -> LinearFit {
    let x: Vec<f64> = curve.iter().map(|(n, _)| *n as f64).collect();
    let y: Vec<f64> = curve.iter().map(|(_, h)| *h).collect();
    linear_fit(&x, &y)
}

pub fn is_monotone(curve: &[(usize, f64)]) -> bool {
    curve.windows(2).all(|w| w[1].1 >= w[0].1)
}
