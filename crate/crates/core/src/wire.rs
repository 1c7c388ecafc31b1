//! Fixed-layout encodings of the eight protocol messages and per-phase byte
//! accounting.
//!
//! In accounting mode a message is exactly its payload; the variant is known
//! from context. Framed mode prepends a one-byte tag and a big-endian u16
//! length for the simulator and is never counted in overhead reports.
//!
//! | msg | layout                                      | bytes |
//! |-----|---------------------------------------------|-------|
//! | 1   | P_u 32, RID_u 16, I_u 32                    | 80    |
//! | 2   | P_d 32, DID_d 16, I_d 32, Auth_d 64         | 144   |
//! | 3   | SID 16, UID 16, R 32, Auth_su 64            | 128   |
//! | 4   | SID 16, DID 16, R 32, Auth_sd 64            | 128   |
//! | 5   | P_u 32, RID 16, I_u 32, pi 128, Auth 64, T1 4 | 276 |
//! | 6   | Auth_s 64, P_s 32, I_s 32, pi 128           | 256   |
//! | 7   | P_d 32, DID 16, I_d 32, pi 128, Auth_d 64   | 272   |
//! | 8   | UID 16, Auth_us 64, I_us 32                 | 112   |

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snark::{SnarkProof, PROOF_BYTES};

pub const POINT_BYTES: usize = 32;
pub const ALIAS_BYTES: usize = 16;
pub const DIGEST_BYTES: usize = 32;
pub const AUTH_BYTES: usize = 64;
pub const TIMESTAMP_BYTES: usize = 4;

pub const INIT_TOTAL: usize = 480;
pub const PROOF_TOTAL: usize = 916;
pub const SESSION_TOTAL: usize = 1396;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("{kind}: expected {expected} bytes, got {got}")]
    Length { kind: MsgKind, expected: usize, got: usize },
    #[error("{kind}: proof envelope padding is not zero")]
    Padding { kind: MsgKind },
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("frame length field {declared} does not match payload {actual}")]
    FrameLength { declared: usize, actual: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgKind {
    Msg1,
    Msg2,
    Msg3,
    Msg4,
    Msg5,
    Msg6,
    Msg7,
    Msg8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Init,
    Proof,
}

impl MsgKind {
    pub const ALL: [MsgKind; 8] = [
        MsgKind::Msg1,
        MsgKind::Msg2,
        MsgKind::Msg3,
        MsgKind::Msg4,
        MsgKind::Msg5,
        MsgKind::Msg6,
        MsgKind::Msg7,
        MsgKind::Msg8,
    ];

    pub fn size(self) -> usize {
        match self {
            MsgKind::Msg1 => POINT_BYTES + ALIAS_BYTES + DIGEST_BYTES,
            MsgKind::Msg2 => POINT_BYTES + ALIAS_BYTES + DIGEST_BYTES + AUTH_BYTES,
            MsgKind::Msg3 | MsgKind::Msg4 => 2 * ALIAS_BYTES + POINT_BYTES + AUTH_BYTES,
            MsgKind::Msg5 => POINT_BYTES + ALIAS_BYTES + DIGEST_BYTES + PROOF_BYTES + AUTH_BYTES + TIMESTAMP_BYTES,
            MsgKind::Msg6 => AUTH_BYTES + POINT_BYTES + DIGEST_BYTES + PROOF_BYTES,
            MsgKind::Msg7 => POINT_BYTES + ALIAS_BYTES + DIGEST_BYTES + PROOF_BYTES + AUTH_BYTES,
            MsgKind::Msg8 => ALIAS_BYTES + AUTH_BYTES + DIGEST_BYTES,
        }
    }

    pub fn phase(self) -> PhaseKind {
        match self {
            MsgKind::Msg1 | MsgKind::Msg2 | MsgKind::Msg3 | MsgKind::Msg4 => PhaseKind::Init,
            _ => PhaseKind::Proof,
        }
    }

    pub fn tag(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_tag(t: u8) -> Result<Self, WireError> {
        MsgKind::ALL
            .get((t as usize).wrapping_sub(1))
            .copied()
            .ok_or(WireError::UnknownTag(t))
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    /// Offset of the proof envelope inside the payload, for messages that carry one.
    pub fn proof_offset(self) -> Option<usize> {
        match self {
            MsgKind::Msg5 | MsgKind::Msg7 => Some(POINT_BYTES + ALIAS_BYTES + DIGEST_BYTES),
            MsgKind::Msg6 => Some(AUTH_BYTES + POINT_BYTES + DIGEST_BYTES),
            _ => None,
        }
    }
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Msg{}", self.index())
    }
}

/// MAC plus key-confirmation digest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct AuthToken {
    pub mac: [u8; 32],
    pub kc: [u8; 32],
}

pub type Point = [u8; POINT_BYTES];
pub type Alias = [u8; ALIAS_BYTES];
pub type Digest = [u8; DIGEST_BYTES];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Msg1 {
    pub p_u: Point,
    pub rid: Alias,
    pub i_u: Digest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Msg2 {
    pub p_d: Point,
    pub did: Alias,
    pub i_d: Digest,
    pub auth: AuthToken,
}

/// Server reply to one leg; `r` carries the relayed peer ephemeral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg3 {
    pub sid: Alias,
    pub uid: Alias,
    pub r: Point,
    pub auth: AuthToken,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg4 {
    pub sid: Alias,
    pub did: Alias,
    pub r: Point,
    pub auth: AuthToken,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg5 {
    pub p_u: Point,
    pub rid: Alias,
    pub i_u: Digest,
    pub proof: SnarkProof,
    pub auth: AuthToken,
    pub t1: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg6 {
    pub auth: AuthToken,
    pub p_s: Point,
    pub i_s: Digest,
    pub proof: SnarkProof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg7 {
    pub p_d: Point,
    pub did: Alias,
    pub i_d: Digest,
    pub proof: SnarkProof,
    pub auth: AuthToken,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Msg8 {
    pub uid: Alias,
    pub auth: AuthToken,
    pub i_us: Digest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireMessage {
    Msg1(Msg1),
    Msg2(Msg2),
    Msg3(Msg3),
    Msg4(Msg4),
    Msg5(Msg5),
    Msg6(Msg6),
    Msg7(Msg7),
    Msg8(Msg8),
}

impl WireMessage {
    pub fn kind(&self) -> MsgKind {
        match self {
            WireMessage::Msg1(_) => MsgKind::Msg1,
            WireMessage::Msg2(_) => MsgKind::Msg2,
            WireMessage::Msg3(_) => MsgKind::Msg3,
            WireMessage::Msg4(_) => MsgKind::Msg4,
            WireMessage::Msg5(_) => MsgKind::Msg5,
            WireMessage::Msg6(_) => MsgKind::Msg6,
            WireMessage::Msg7(_) => MsgKind::Msg7,
            WireMessage::Msg8(_) => MsgKind::Msg8,
        }
    }
}

struct Out(Vec<u8>);

impl Out {
    fn put(&mut self, b: &[u8]) -> &mut Self {
        self.0.extend_from_slice(b);
        self
    }
    fn auth(&mut self, a: &AuthToken) -> &mut Self {
        self.put(&a.mac).put(&a.kc)
    }
}

struct In<'a>(&'a [u8]);

impl In<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (h, t) = self.0.split_at(N);
        self.0 = t;
        h.try_into().unwrap()
    }
    fn auth(&mut self) -> AuthToken {
        AuthToken {
            mac: self.take(),
            kc: self.take(),
        }
    }
    fn proof(&mut self) -> SnarkProof {
        SnarkProof(self.take())
    }
}

/// Canonical payload bytes.
pub fn encode(msg: &WireMessage) -> Vec<u8> {
    let mut o = Out(Vec::with_capacity(msg.kind().size()));
    match msg {
        WireMessage::Msg1(m) => {
            o.put(&m.p_u).put(&m.rid).put(&m.i_u);
        }
        WireMessage::Msg2(m) => {
            o.put(&m.p_d).put(&m.did).put(&m.i_d).auth(&m.auth);
        }
        WireMessage::Msg3(m) => {
            o.put(&m.sid).put(&m.uid).put(&m.r).auth(&m.auth);
        }
        WireMessage::Msg4(m) => {
            o.put(&m.sid).put(&m.did).put(&m.r).auth(&m.auth);
        }
        WireMessage::Msg5(m) => {
            o.put(&m.p_u)
                .put(&m.rid)
                .put(&m.i_u)
                .put(&m.proof.0)
                .auth(&m.auth)
                .put(&m.t1.to_be_bytes());
        }
        WireMessage::Msg6(m) => {
            o.auth(&m.auth).put(&m.p_s).put(&m.i_s).put(&m.proof.0);
        }
        WireMessage::Msg7(m) => {
            o.put(&m.p_d).put(&m.did).put(&m.i_d).put(&m.proof.0).auth(&m.auth);
        }
        WireMessage::Msg8(m) => {
            o.put(&m.uid).auth(&m.auth).put(&m.i_us);
        }
    }
    debug_assert_eq!(o.0.len(), msg.kind().size());
    o.0
}

/// Strict parse: exact length, zero padding inside proof envelopes.
pub fn decode(bytes: &[u8], kind: MsgKind) -> Result<WireMessage, WireError> {
    if bytes.len() != kind.size() {
        return Err(WireError::Length {
            kind,
            expected: kind.size(),
            got: bytes.len(),
        });
    }
    let mut i = In(bytes);
    let msg = match kind {
        MsgKind::Msg1 => WireMessage::Msg1(Msg1 {
            p_u: i.take(),
            rid: i.take(),
            i_u: i.take(),
        }),
        MsgKind::Msg2 => WireMessage::Msg2(Msg2 {
            p_d: i.take(),
            did: i.take(),
            i_d: i.take(),
            auth: i.auth(),
        }),
        MsgKind::Msg3 => WireMessage::Msg3(Msg3 {
            sid: i.take(),
            uid: i.take(),
            r: i.take(),
            auth: i.auth(),
        }),
        MsgKind::Msg4 => WireMessage::Msg4(Msg4 {
            sid: i.take(),
            did: i.take(),
            r: i.take(),
            auth: i.auth(),
        }),
        MsgKind::Msg5 => WireMessage::Msg5(Msg5 {
            p_u: i.take(),
            rid: i.take(),
            i_u: i.take(),
            proof: i.proof(),
            auth: i.auth(),
            t1: u32::from_be_bytes(i.take()),
        }),
        MsgKind::Msg6 => WireMessage::Msg6(Msg6 {
            auth: i.auth(),
            p_s: i.take(),
            i_s: i.take(),
            proof: i.proof(),
        }),
        MsgKind::Msg7 => WireMessage::Msg7(Msg7 {
            p_d: i.take(),
            did: i.take(),
            i_d: i.take(),
            proof: i.proof(),
            auth: i.auth(),
        }),
        MsgKind::Msg8 => WireMessage::Msg8(Msg8 {
            uid: i.take(),
            auth: i.auth(),
            i_us: i.take(),
        }),
    };
    let proof = match &msg {
        WireMessage::Msg5(m) => Some(m.proof),
        WireMessage::Msg6(m) => Some(m.proof),
        WireMessage::Msg7(m) => Some(m.proof),
        _ => None,
    };
    if proof.is_some_and(|p| !p.has_valid_padding()) {
        return Err(WireError::Padding { kind });
    }
    Ok(msg)
}

/// `tag || len_be16 || payload`.
pub fn encode_framed(msg: &WireMessage) -> Vec<u8> {
    let payload = encode(msg);
    let mut out = Vec::with_capacity(3 + payload.len());
    out.push(msg.kind().tag());
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode_framed(bytes: &[u8]) -> Result<WireMessage, WireError> {
    if bytes.len() < 3 {
        return Err(WireError::FrameLength {
            declared: 0,
            actual: bytes.len(),
        });
    }
    let kind = MsgKind::from_tag(bytes[0])?;
    let declared = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
    if declared != bytes.len() - 3 {
        return Err(WireError::FrameLength {
            declared,
            actual: bytes.len() - 3,
        });
    }
    decode(&bytes[3..], kind)
}

// ---------------------------------------------------------------------------
// Overhead accounting

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSize {
    pub kind: MsgKind,
    pub round: usize,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub messages: Vec<MessageSize>,
    pub init_bytes: usize,
    pub proof_bytes: usize,
    pub total_bytes: usize,
    /// Bytes beyond the first proof round (per-waypoint mode), itemised.
    pub extras: Vec<MessageSize>,
    pub extra_bytes: usize,
    /// False when some of the eight messages never appeared.
    pub complete: bool,
}

/// Builds the report from `(kind, size)` in send order. Msg5-Msg7 repeats
/// mark additional proof rounds.
pub fn overhead_report(trace: &[(MsgKind, usize)]) -> OverheadReport {
    let mut messages = Vec::new();
    let mut extras = Vec::new();
    let mut round = 0usize;
    let mut seen = [false; 8];
    let (mut init, mut proof) = (0, 0);
    for &(kind, bytes) in trace {
        if kind == MsgKind::Msg5 && seen[4] {
            round += 1;
        }
        let entry = MessageSize { kind, round, bytes };
        match kind.phase() {
            PhaseKind::Init => init += bytes,
            PhaseKind::Proof => proof += bytes,
        }
        if round > 0 && matches!(kind, MsgKind::Msg5 | MsgKind::Msg6 | MsgKind::Msg7) {
            extras.push(entry.clone());
        }
        seen[kind as usize] = true;
        messages.push(entry);
    }
    let extra_bytes = extras.iter().map(|e| e.bytes).sum();
    OverheadReport {
        messages,
        init_bytes: init,
        proof_bytes: proof,
        total_bytes: init + proof,
        extras,
        extra_bytes,
        complete: seen.iter().all(|s| *s),
    }
}

/// The nominal single-round session as a trace.
pub fn nominal_trace() -> Vec<(MsgKind, usize)> {
    MsgKind::ALL.iter().map(|k| (*k, k.size())).collect()
}

impl OverheadReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["message", "round", "phase", "bytes"]).unwrap();
        for m in &self.messages {
            let phase = match m.kind.phase() {
                PhaseKind::Init => "init",
                PhaseKind::Proof => "proof",
            };
            w.write_record([m.kind.to_string(), m.round.to_string(), phase.into(), m.bytes.to_string()])
                .unwrap();
        }
        w.write_record(["init_subtotal", "", "init", &self.init_bytes.to_string()]).unwrap();
        w.write_record(["proof_subtotal", "", "proof", &self.proof_bytes.to_string()]).unwrap();
        w.write_record(["extras", "", "proof", &self.extra_bytes.to_string()]).unwrap();
        w.write_record(["total", "", "", &self.total_bytes.to_string()]).unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_reconcile() {
        let sizes: Vec<usize> = MsgKind::ALL.iter().map(|k| k.size()).collect();
        assert_eq!(sizes, vec![80, 144, 128, 128, 276, 256, 272, 112]);
        let r = overhead_report(&nominal_trace());
        assert_eq!((r.init_bytes, r.proof_bytes, r.total_bytes), (INIT_TOTAL, PROOF_TOTAL, SESSION_TOTAL));
        assert!(r.complete);
        assert!(r.extras.is_empty());
    }

    #[test]
    fn init_only_is_partial() {
        let r = overhead_report(&nominal_trace()[..4]);
        assert_eq!((r.init_bytes, r.proof_bytes, r.total_bytes), (480, 0, 480));
        assert!(!r.complete);
    }

    #[test]
    fn tags_round_trip() {
        for k in MsgKind::ALL {
            assert_eq!(MsgKind::from_tag(k.tag()).unwrap(), k);
        }
        assert_eq!(MsgKind::from_tag(0), Err(WireError::UnknownTag(0)));
        assert_eq!(MsgKind::from_tag(9), Err(WireError::UnknownTag(9)));
    }

    #[test]
    fn csv_has_totals() {
        let csv = overhead_report(&nominal_trace()).to_csv();
        assert!(csv.starts_with("message,round,phase,bytes\n"));
        assert!(csv.contains("total,,,1396"));
    }
}
