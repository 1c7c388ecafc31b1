//! Message-driven composition of the three state machines for one session,
//! shared by the sequential driver, the simulator and the CLI.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::fsm::*;
use super::setup::Mission;
use super::{timestamp_from_micros, Phase, ProtocolError, Role, SessionContext};
use crate::rng::SimRng;
use crate::snark::{FlightPath, Geofence};
use crate::wire::{decode, encode, MsgKind, WireMessage};

/// One message in flight. Msg6 and Msg8 are also observed by the party
/// that is not the addressee; they are still a single transmission.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub kind: MsgKind,
    pub round: usize,
    pub from: Role,
    pub to: Role,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SessionOutcome {
    InProgress,
    Confirmed,
    Failed { at: Role, error: ProtocolError },
}

impl SessionOutcome {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, SessionOutcome::Confirmed)
    }

    pub fn reason(&self) -> &'static str {
        match self {
            SessionOutcome::InProgress => "in-progress",
            SessionOutcome::Confirmed => "confirmed",
            SessionOutcome::Failed { error, .. } => error.reason(),
        }
    }
}

/// Replies and the receiver's verdict for one delivery.
#[derive(Clone, Debug)]
pub struct Delivery {
    pub replies: Vec<Envelope>,
    pub verdict: Result<(), (Role, ProtocolError)>,
    /// An init message was stored until its partner arrives; it has not
    /// been verified yet.
    pub buffered: bool,
}

#[derive(Clone)]
pub struct SessionRun {
    pub user: SessionContext,
    pub drone: SessionContext,
    pub server: SessionContext,
    pub user_path: FlightPath,
    rng: SimRng,
    msg1: Option<WireMessage>,
    msg2: Option<WireMessage>,
    outcome: SessionOutcome,
}

impl SessionRun {
    /// Assigns the mission to all three parties. `paths` are the witnesses
    /// of user, drone and server.
    pub fn new(
        mut user: SessionContext,
        mut drone: SessionContext,
        mut server: SessionContext,
        mission: Mission,
        paths: [FlightPath; 3],
        rng: SimRng,
    ) -> Self {
        let [pu, pd, ps] = paths;
        user.set_mission(mission, pu.clone());
        drone.set_mission(mission, pd);
        server.set_mission(mission, ps);
        SessionRun {
            user,
            drone,
            server,
            user_path: pu,
            rng,
            msg1: None,
            msg2: None,
            outcome: SessionOutcome::InProgress,
        }
    }

    pub fn outcome(&self) -> &SessionOutcome {
        &self.outcome
    }

    pub fn into_parties(self) -> (SessionContext, SessionContext, SessionContext) {
        (self.user, self.drone, self.server)
    }

    fn failed(&mut self, at: Role, error: ProtocolError) -> Vec<Envelope> {
        if self.outcome == SessionOutcome::InProgress {
            self.outcome = SessionOutcome::Failed { at, error };
        }
        Vec::new()
    }

    fn ctx(&mut self, role: Role) -> &mut SessionContext {
        match role {
            Role::User => &mut self.user,
            Role::Drone => &mut self.drone,
            Role::Server => &mut self.server,
        }
    }

    fn envelope(msg: &WireMessage, round: usize, from: Role, to: Role) -> Envelope {
        Envelope {
            kind: msg.kind(),
            round,
            from,
            to,
            bytes: encode(msg),
        }
    }

    /// Msg1 from the user and Msg2 from the drone, both to the server.
    pub fn start(&mut self, now_us: u64) -> Vec<Envelope> {
        let now = timestamp_from_micros(now_us);
        let m1 = match user_begin_init(&mut self.user, &mut self.rng, now) {
            Ok(m) => WireMessage::Msg1(m),
            Err(e) => return self.failed(Role::User, e),
        };
        let m2 = match drone_begin_init(&mut self.drone, &mut self.rng, now) {
            Ok(m) => WireMessage::Msg2(m),
            Err(e) => return self.failed(Role::Drone, e),
        };
        vec![
            Self::envelope(&m1, 0, Role::User, Role::Server),
            Self::envelope(&m2, 0, Role::Drone, Role::Server),
        ]
    }

    /// Delivers one envelope and returns what the receivers send in reply.
    pub fn deliver(&mut self, env: &Envelope, now_us: u64) -> Vec<Envelope> {
        self.deliver_verdict(env, now_us).replies
    }

    /// Like [`deliver`](Self::deliver) but also reports the receiver's
    /// decision. Messages still reach the contexts after the outcome is
    /// settled, so late replays are judged by the phase guards.
    pub fn deliver_verdict(&mut self, env: &Envelope, now_us: u64) -> Delivery {
        let now = timestamp_from_micros(now_us);
        let pending_init = [&self.msg1, &self.msg2].iter().filter(|m| m.is_some()).count();
        let r = match decode(&env.bytes, env.kind) {
            Ok(msg) => self.dispatch(msg, now),
            Err(e) => {
                let e = self.ctx(env.to).fail(e.into());
                Err((env.to, e))
            }
        };
        match r {
            Ok(replies) => {
                let buffered = matches!(env.kind, MsgKind::Msg1 | MsgKind::Msg2)
                    && replies.is_empty()
                    && pending_init == 0;
                if self.outcome == SessionOutcome::InProgress
                    && [&self.user, &self.drone, &self.server].iter().all(|c| c.phase() == Phase::Confirmed)
                {
                    self.outcome = SessionOutcome::Confirmed;
                }
                Delivery {
                    replies,
                    verdict: Ok(()),
                    buffered,
                }
            }
            Err((at, e)) => {
                if self.ctx(at).phase() == Phase::Failed && self.outcome == SessionOutcome::InProgress {
                    self.outcome = SessionOutcome::Failed { at, error: e.clone() };
                }
                Delivery {
                    replies: Vec::new(),
                    verdict: Err((at, e)),
                    buffered: false,
                }
            }
        }
    }

    fn dispatch(&mut self, msg: WireMessage, now: u32) -> Result<Vec<Envelope>, (Role, ProtocolError)> {
        match msg {
            WireMessage::Msg1(_) | WireMessage::Msg2(_) => self.init_arrival(msg, now),
            WireMessage::Msg3(m) => match user_accept_auth(&mut self.user, &m, now) {
                Ok(()) => self.maybe_prove(now),
                Err(e) => Err((Role::User, e)),
            },
            WireMessage::Msg4(m) => match drone_accept_auth(&mut self.drone, &m, now) {
                Ok(()) => self.maybe_prove(now),
                Err(e) => Err((Role::Drone, e)),
            },
            WireMessage::Msg5(m) => {
                let round = self.server.round();
                server_process_proof(&mut self.server, &m, &mut self.rng, now)
                    .map(|r| vec![Self::envelope(&WireMessage::Msg6(r), round, Role::Server, Role::Drone)])
                    .map_err(|e| (Role::Server, e))
            }
            WireMessage::Msg6(m) => {
                let round = self.drone.round();
                match drone_process_server_proof(&mut self.drone, &m, &mut self.rng, now) {
                    Ok(r) => match user_observe_server_proof(&mut self.user, &m, now) {
                        Ok(()) => Ok(vec![Self::envelope(&WireMessage::Msg7(r), round, Role::Drone, Role::User)]),
                        Err(e) => Err((Role::User, e)),
                    },
                    Err(e) => Err((Role::Drone, e)),
                }
            }
            WireMessage::Msg7(m) => self.user_round_end(&m, now),
            WireMessage::Msg8(m) => match server_confirm(&mut self.server, &m, now) {
                Ok(()) => match drone_observe_confirm(&mut self.drone, &m, now) {
                    Ok(()) => Ok(Vec::new()),
                    Err(e) => Err((Role::Drone, e)),
                },
                Err(e) => Err((Role::Server, e)),
            },
        }
    }

    /// Independent copy for what-if deliveries: contexts and rng are cloned
    /// and the nonce registry is deep-copied.
    pub fn fork(&self) -> SessionRun {
        let mut f = self.clone();
        let reg = std::sync::Arc::new(self.user.nonces.as_ref().clone());
        for c in [&mut f.user, &mut f.drone, &mut f.server] {
            c.nonces = reg.clone();
        }
        f
    }

    fn init_arrival(&mut self, msg: WireMessage, now: u32) -> Result<Vec<Envelope>, (Role, ProtocolError)> {
        let slot = match msg {
            WireMessage::Msg1(_) => &mut self.msg1,
            _ => &mut self.msg2,
        };
        if slot.is_some() || self.server.phase() != Phase::Registered {
            return Err((Role::Server, ProtocolError::ReplayReject));
        }
        *slot = Some(msg);
        let (Some(WireMessage::Msg1(m1)), Some(WireMessage::Msg2(m2))) = (self.msg1, self.msg2) else {
            return Ok(Vec::new());
        };
        let (m3, m4) =
            server_process_init(&mut self.server, &m1, &m2, &mut self.rng, now).map_err(|e| (Role::Server, e))?;
        Ok(vec![
            Self::envelope(&WireMessage::Msg3(m3), 0, Role::Server, Role::User),
            Self::envelope(&WireMessage::Msg4(m4), 0, Role::Server, Role::Drone),
        ])
    }

    /// Once both legs are authenticated the keys are cross-checked and the
    /// user starts the first proof round.
    fn maybe_prove(&mut self, now: u32) -> Result<Vec<Envelope>, (Role, ProtocolError)> {
        if self.user.phase() != Phase::Authenticated || self.drone.phase() != Phase::Authenticated {
            return Ok(Vec::new());
        }
        finalize_session_keys(&mut self.user, &mut self.drone, now).map_err(|e| (Role::User, e))?;
        self.prove(now)
    }

    fn prove(&mut self, now: u32) -> Result<Vec<Envelope>, (Role, ProtocolError)> {
        let round = self.user.round();
        let backend = self.user.params().backend;
        let path = self.user_path.clone();
        let m5 = user_prove_path(&mut self.user, &path, backend, &mut self.rng, now).map_err(|e| (Role::User, e))?;
        Ok(vec![Self::envelope(&WireMessage::Msg5(m5), round, Role::User, Role::Server)])
    }

    fn user_round_end(&mut self, m: &crate::wire::Msg7, now: u32) -> Result<Vec<Envelope>, (Role, ProtocolError)> {
        let rounds = self.user.mission().map(|m| m.rounds).unwrap_or(1);
        let round = self.user.round();
        if round + 1 < rounds {
            user_accept_round(&mut self.user, m, now).map_err(|e| (Role::User, e))?;
            self.prove(now)
        } else {
            let m8 = user_confirm(&mut self.user, m, now).map_err(|e| (Role::User, e))?;
            Ok(vec![Self::envelope(&WireMessage::Msg8(m8), round, Role::User, Role::Server)])
        }
    }
}

/// Every transmission of a run, with its delivery time in microseconds.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    pub entries: Vec<(u64, Envelope)>,
}

impl Transcript {
    /// `(kind, size)` pairs for overhead accounting.
    pub fn sizes(&self) -> Vec<(MsgKind, usize)> {
        self.entries.iter().map(|(_, e)| (e.kind, e.bytes.len())).collect()
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(|(_, e)| e.bytes.len()).sum()
    }
}

/// Runs a session to completion over a channel with fixed per-hop latency.
/// `hook` sees each envelope before delivery and may rewrite it or its
/// delivery time.
pub fn drive(
    run: &mut SessionRun,
    start_us: u64,
    hop_us: u64,
    mut hook: impl FnMut(&mut Envelope, &mut u64),
) -> Transcript {
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |q: &mut BinaryHeap<_>, envs: Vec<Envelope>, at: u64| {
        for mut e in envs {
            let mut t = at + hop_us;
            hook(&mut e, &mut t);
            q.push(Reverse((t, seq, EnvOrd(e))));
            seq += 1;
        }
    };
    let first = run.start(start_us);
    push(&mut queue, first, start_us);
    let mut transcript = Transcript::default();
    while let Some(Reverse((t, _, EnvOrd(env)))) = queue.pop() {
        let out = run.deliver(&env, t);
        transcript.entries.push((t, env));
        push(&mut queue, out, t);
    }
    transcript
}

pub fn run_honest_session(run: &mut SessionRun, start_us: u64, hop_us: u64) -> Transcript {
    drive(run, start_us, hop_us, |_, _| {})
}

#[derive(Debug)]
struct EnvOrd(Envelope);

impl PartialEq for EnvOrd {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for EnvOrd {}
impl PartialOrd for EnvOrd {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for EnvOrd {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

/// A random route of `n` waypoints inside `fence`.
pub fn random_route<R: Rng>(rng: &mut R, fence: &Geofence, n: usize) -> FlightPath {
    let pts = (0..n)
        .map(|_| {
            (
                rng.gen_range(fence.x_min..=fence.x_max),
                rng.gen_range(fence.y_min..=fence.y_max),
            )
        })
        .collect();
    FlightPath::new(pts).expect("n > 0")
}

/// Geofence used by the demos and the simulator.
pub fn standard_fence() -> Geofence {
    Geofence::new(1_000, 9_000, 1_000, 9_000).expect("static bounds")
}

/// Registers user and drone number `index` with identities derived from `seed`.
pub fn enroll_pair(
    authority: &super::Authority,
    seed: u64,
    index: u64,
) -> Result<(SessionContext, SessionContext), ProtocolError> {
    let mut rng = crate::rng::sub_rng(seed, &format!("enroll/{index}"));
    let mut uid = [0u8; 16];
    let mut did = [0u8; 16];
    rng.fill(&mut uid);
    rng.fill(&mut did);
    let pwd = format!("pw-{seed}-{index}");
    let user = super::register(authority, super::Enrollment::user(uid, pwd.as_bytes()), &mut rng)?;
    let drone = super::register(authority, super::Enrollment::drone(did), &mut rng)?;
    Ok((user, drone))
}

/// A session over `route` where all three parties hold the honest witness.
pub fn honest_run(
    authority: &super::Authority,
    user: SessionContext,
    drone: SessionContext,
    route: &FlightPath,
    per_waypoint: bool,
    rng: SimRng,
) -> SessionRun {
    let mission = Mission::for_route(standard_fence(), route, per_waypoint);
    SessionRun::new(
        user,
        drone,
        authority.server_session(),
        mission,
        [route.clone(), route.clone(), route.clone()],
        rng,
    )
}
