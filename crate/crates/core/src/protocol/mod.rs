//! Per-entity state machines for the three parties.
//!
//! Every operation takes the receiving context, the message and an injected
//! clock reading. Any error moves the context to [`Phase::Failed`] and
//! erases its derived keys, except in a context that has already confirmed.

mod context;
mod fsm;
mod session;
mod setup;
pub mod tokens;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kex::KexError;
use crate::snark::SnarkError;
use crate::wire::WireError;

pub use context::{EntityIdentity, SessionContext};
pub use fsm::{
    drone_accept_auth, drone_begin_init, drone_observe_confirm, drone_process_server_proof, finalize_session_keys,
    server_confirm, server_process_init, server_process_proof, user_accept_auth, user_accept_round, user_begin_init,
    user_confirm, user_observe_server_proof, user_prove_path,
};
pub use session::{drive, Delivery, enroll_pair, honest_run, random_route, run_honest_session, standard_fence, Envelope, SessionOutcome, SessionRun, Transcript};
pub use setup::{register, Authority, Enrollment, Mission, NonceRegistry, QapKeyring, SystemParams};

/// Seconds since the Unix epoch, as carried in `T1`.
pub type Timestamp = u32;

/// Simulated clocks start here.
pub const EPOCH: Timestamp = 1_700_000_000;

/// Default freshness window in seconds.
pub const DEFAULT_DELTA_T: u32 = 2;

/// How far back the server searches for an init timestamp before deciding
/// that a stale message is a forgery rather than a replay.
pub const INIT_LOOKBACK: u32 = 30;

/// Timestamp of a microsecond clock reading.
pub fn timestamp_from_micros(us: u64) -> Timestamp {
    EPOCH + (us / 1_000_000) as u32
}

/// `|t_now - t_msg| < window`.
pub fn check_freshness(t_msg: Timestamp, t_now: Timestamp, window: u32) -> bool {
    t_now.abs_diff(t_msg) < window
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    User,
    Drone,
    Server,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::User => 1,
            Role::Drone => 2,
            Role::Server => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Registered,
    InitSent,
    Authenticated,
    ProofSent,
    Confirmed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("{op} not allowed for {role:?} in phase {phase:?}")]
    ProtocolViolation { op: &'static str, role: Role, phase: Phase },
    #[error("nonce already used")]
    NonceReuse,
    #[error("entity already registered")]
    DuplicateRegistration,
    #[error("key error: {0}")]
    InvalidKey(#[from] KexError),
    #[error("unknown alias")]
    UnknownEntity,
    #[error("authentication token rejected")]
    AuthFailure,
    #[error("stale or replayed message")]
    ReplayReject,
    #[error("proof rejected")]
    ProofReject,
    #[error("key confirmation failed")]
    KeyConfirmFailure,
    #[error("freshness window exceeded before key confirmation")]
    StaleAbort,
    #[error("witness violates constraint {constraint}")]
    WitnessInvalid { constraint: usize },
    #[error("no mission assigned")]
    MissingMission,
    #[error("malformed message: {0}")]
    Malformed(#[from] WireError),
    #[error("proof system: {0}")]
    Snark(SnarkError),
}

impl ProtocolError {
    /// Stable short code for histograms and CLI output.
    pub fn reason(&self) -> &'static str {
        match self {
            ProtocolError::ProtocolViolation { .. } | ProtocolError::NonceReuse => "protocol-violation",
            ProtocolError::DuplicateRegistration => "duplicate-registration",
            ProtocolError::InvalidKey(_) => "invalid-key",
            ProtocolError::UnknownEntity => "unknown-entity",
            ProtocolError::AuthFailure => "auth-failure",
            ProtocolError::ReplayReject => "replay-reject",
            ProtocolError::ProofReject => "proof-reject",
            ProtocolError::KeyConfirmFailure => "key-confirm-failure",
            ProtocolError::StaleAbort => "stale-abort",
            ProtocolError::WitnessInvalid { .. } => "witness-invalid",
            ProtocolError::MissingMission => "missing-mission",
            ProtocolError::Malformed(_) => "malformed",
            ProtocolError::Snark(_) => "snark",
        }
    }
}

impl From<SnarkError> for ProtocolError {
    fn from(e: SnarkError) -> Self {
        match e {
            SnarkError::WitnessInvalid { constraint } => ProtocolError::WitnessInvalid { constraint },
            e => ProtocolError::Snark(e),
        }
    }
}
