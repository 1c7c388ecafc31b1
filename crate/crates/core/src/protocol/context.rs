use std::fmt;
use std::sync::{Arc, Mutex};

use super::setup::{Authority, Directory, Mission, NonceRegistry, SystemParams};
use super::{Phase, ProtocolError, Role, Timestamp};
use crate::arith::{CurvePoint, Scalar};
use crate::kex::{KeyPair, SessionKey};
use crate::snark::FlightPath;
use crate::wire::{Alias, Point};

/// Public identity of an entity. The raw `id` stays inside the context and
/// is never serialised into a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntityIdentity {
    pub role: Role,
    pub id: [u8; 16],
    pub alias: Alias,
}

/// Server-side view of one registered party within a session.
#[derive(Clone, Debug)]
pub(crate) struct Leg {
    pub alias: Alias,
    pub public_x: Point,
    pub k_master: [u8; 32],
}

/// Everything derived during one session; dropped wholesale on failure.
#[derive(Clone, Debug, Default)]
pub(crate) struct SessionState {
    pub k_master: Option<[u8; 32]>,
    pub salt: Option<[u8; 16]>,
    pub nonce: Option<Scalar>,
    pub ephemeral: Option<CurvePoint>,
    pub peer_ephemeral: Option<CurvePoint>,
    pub sk: Option<SessionKey>,
    pub sk_point: Option<CurvePoint>,
    pub uid: Option<Alias>,
    pub t_start: Option<Timestamp>,
    pub t_auth: Option<Timestamp>,
    pub t_last: Option<Timestamp>,
    pub round: usize,
    /// Digests of the server and drone proofs of the current round.
    pub pi_s: Option<[u8; 32]>,
    pub pi_d: Option<[u8; 32]>,
    /// Drone public key and alias as first seen by the user.
    pub drone_peer: Option<(Point, Alias)>,
    /// Server legs: user, drone.
    pub legs: Option<(Leg, Leg)>,
}

#[derive(Clone)]
pub(crate) struct ServerSecrets {
    pub keypair: KeyPair,
    pub directory: Arc<Mutex<Directory>>,
}

/// Protocol state of one entity for one session.
#[derive(Clone)]
pub struct SessionContext {
    pub(crate) role: Role,
    pub(crate) phase: Phase,
    pub(crate) params: Arc<SystemParams>,
    pub(crate) nonces: Arc<NonceRegistry>,
    pub(crate) identity: Option<EntityIdentity>,
    pub(crate) keypair: Option<KeyPair>,
    pub(crate) credential: [u8; 32],
    pub(crate) server: Option<ServerSecrets>,
    pub(crate) mission: Option<Mission>,
    pub(crate) witness: Option<FlightPath>,
    pub(crate) s: SessionState,
    pub(crate) failure: Option<ProtocolError>,
}

impl fmt::Debug for SessionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionContext")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("round", &self.s.round)
            .field("failure", &self.failure)
            .finish_non_exhaustive()
    }
}

impl SessionContext {
    /// An unregistered context. Every protocol operation fails on it.
    pub fn idle(authority: &Authority, role: Role) -> Self {
        SessionContext {
            role,
            phase: Phase::Idle,
            params: authority.params.clone(),
            nonces: authority.nonces.clone(),
            identity: None,
            keypair: None,
            credential: [0; 32],
            server: None,
            mission: None,
            witness: None,
            s: SessionState::default(),
            failure: None,
        }
    }

    pub(crate) fn registered(
        authority: &Authority,
        role: Role,
        id: [u8; 16],
        alias: Alias,
        keypair: KeyPair,
        credential: [u8; 32],
    ) -> Self {
        let mut c = Self::idle(authority, role);
        c.phase = Phase::Registered;
        c.identity = Some(EntityIdentity { role, id, alias });
        c.keypair = Some(keypair);
        c.credential = credential;
        c
    }

    pub(crate) fn server(authority: &Authority) -> Self {
        let p = &authority.params;
        let mut c = Self::registered(authority, Role::Server, p.id_s, p.sid, authority.server, [0; 32]);
        c.server = Some(ServerSecrets {
            keypair: authority.server,
            directory: authority.directory.clone(),
        });
        c
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn identity(&self) -> Option<&EntityIdentity> {
        self.identity.as_ref()
    }

    pub fn public_key(&self) -> Option<&CurvePoint> {
        self.keypair.as_ref().map(|k| k.public())
    }

    pub fn session_key(&self) -> Option<&SessionKey> {
        self.s.sk.as_ref()
    }

    /// The shared point behind the session key.
    pub fn session_point(&self) -> Option<&CurvePoint> {
        self.s.sk_point.as_ref()
    }

    pub fn failure(&self) -> Option<&ProtocolError> {
        self.failure.as_ref()
    }

    pub fn round(&self) -> usize {
        self.s.round
    }

    pub fn mission(&self) -> Option<&Mission> {
        self.mission.as_ref()
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Session nonce, exposed for key-agreement tests.
    pub fn session_nonce(&self) -> Option<&Scalar> {
        self.s.nonce.as_ref()
    }

    /// True when no derived key material is held.
    pub fn keys_erased(&self) -> bool {
        self.s.k_master.is_none() && self.s.sk.is_none() && self.s.nonce.is_none() && self.s.legs.is_none()
    }

    pub fn set_mission(&mut self, mission: Mission, witness: FlightPath) {
        self.mission = Some(mission);
        self.witness = Some(witness);
    }

    /// Long-term private key, exposed for key-compromise scenarios.
    pub fn long_term_secret(&self) -> Option<&Scalar> {
        self.keypair.as_ref().map(|k| k.secret())
    }

    /// Starts a new session with the same long-term keys.
    pub fn new_session(&mut self) {
        if self.phase != Phase::Idle {
            self.phase = Phase::Registered;
        }
        self.s = SessionState::default();
        self.failure = None;
    }

    /// Records `e`, moves to `Failed` and erases derived keys. A confirmed
    /// session is left intact.
    pub(crate) fn fail(&mut self, e: ProtocolError) -> ProtocolError {
        if self.phase != Phase::Confirmed {
            self.phase = Phase::Failed;
            self.s = SessionState::default();
            self.failure = Some(e.clone());
        }
        e
    }

    /// Checks role and phase. For receive operations a phase past the
    /// accepted ones means the step already ran, so the message is a replay.
    pub(crate) fn guard(&self, op: &'static str, role: Role, allowed: &[Phase], receive: bool) -> Result<(), ProtocolError> {
        let violation = ProtocolError::ProtocolViolation {
            op,
            role: self.role,
            phase: self.phase,
        };
        if self.role != role {
            return Err(violation);
        }
        if allowed.contains(&self.phase) {
            return Ok(());
        }
        let latest = allowed.iter().max().copied().unwrap_or(Phase::Idle);
        if receive && self.phase != Phase::Failed && self.phase > latest {
            return Err(ProtocolError::ReplayReject);
        }
        Err(violation)
    }

    pub(crate) fn sk(&self) -> Result<SessionKey, ProtocolError> {
        self.s.sk.ok_or(ProtocolError::KeyConfirmFailure)
    }

    pub(crate) fn k_master(&self) -> Result<[u8; 32], ProtocolError> {
        self.s.k_master.ok_or(ProtocolError::AuthFailure)
    }

    pub(crate) fn alias(&self) -> Alias {
        self.identity.map(|i| i.alias).unwrap_or_default()
    }

    pub(crate) fn public_x(&self) -> Point {
        self.keypair
            .as_ref()
            .and_then(|k| k.public().to_xonly().ok())
            .unwrap_or_default()
    }
}
