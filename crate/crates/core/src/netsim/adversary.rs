//! Channel adversaries. They see and rewrite wire bytes only; the public
//! view holds what any eavesdropper can learn from the published system
//! parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{CurvePoint, DomainParams, Scalar};
use crate::kex::{derive_session_key_with_point, ecdh, gen_keypair, SessionKey};
use crate::protocol::tokens::{self, digest, key_confirm, mac};
use crate::protocol::{timestamp_from_micros, Envelope, Role, SystemParams};
use crate::rng::SimRng;
use crate::snark::PROOF_BYTES;
use crate::wire::{decode, encode, Alias, AuthToken, Msg1, Msg2, Msg3, Msg4, MsgKind, Point, WireMessage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperPolicy {
    /// One uniformly chosen bit of one uniformly chosen message kind.
    AnyBit,
    /// One bit inside a proof envelope of Msg5, Msg6 or Msg7.
    ProofBits,
    /// A fixed bit of the first message of `kind`.
    Bit { kind: MsgKind, bit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitmMode {
    /// Records traffic and forwards it unchanged.
    Passive,
    /// Replaces both relayed ephemerals with adversary-chosen ones.
    Ephemerals,
    /// Replaces the user or drone public key with the adversary's own.
    PublicKeys,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    None,
    /// Every message is delivered again after the delay.
    Replay { delay_ms: u64 },
    Mitm(MitmMode),
    TamperBit(TamperPolicy),
    /// Forges the messages of the target role.
    Impersonate(Role),
}

impl AdversaryKind {
    pub fn label(&self) -> String {
        match self {
            AdversaryKind::None => "none".into(),
            AdversaryKind::Replay { delay_ms } => format!("replay-{delay_ms}ms"),
            AdversaryKind::Mitm(m) => format!("mitm-{m:?}").to_lowercase(),
            AdversaryKind::TamperBit(TamperPolicy::AnyBit) => "tamper-any".into(),
            AdversaryKind::TamperBit(TamperPolicy::ProofBits) => "tamper-proof".into(),
            AdversaryKind::TamperBit(TamperPolicy::Bit { kind, bit }) => format!("tamper-{kind}-{bit}"),
            AdversaryKind::Impersonate(r) => format!("impersonate-{r:?}").to_lowercase(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Honest,
    Replayed,
    Forged,
    Tampered,
}

/// An envelope released onto the channel by the adversary.
#[derive(Clone, Debug)]
pub struct Emission {
    pub env: Envelope,
    pub origin: Origin,
    pub extra_delay_us: u64,
}

/// Published parameters.
#[derive(Clone, Copy, Debug)]
pub struct PublicView {
    pub curve: &'static DomainParams,
    pub p_s: CurvePoint,
    pub p_s_x: Point,
    pub sid: Alias,
}

impl PublicView {
    pub fn of(params: &SystemParams) -> Self {
        PublicView {
            curve: params.curve,
            p_s: params.p_s,
            p_s_x: params.p_s_x,
            sid: params.sid,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Observed {
    msg1: Option<Msg1>,
    msg2: Option<Msg2>,
    sent: usize,
    done: bool,
}

pub struct Adversary {
    kind: AdversaryKind,
    view: PublicView,
    rng: SimRng,
    /// Drone private key held in key-compromise scenarios.
    drone_secret: Option<Scalar>,
    known_keys: Vec<[u8; 32]>,
    target: Option<(MsgKind, usize)>,
    seen: Observed,
}

impl Adversary {
    pub fn new(kind: AdversaryKind, view: PublicView, rng: SimRng) -> Self {
        Adversary {
            kind,
            view,
            rng,
            drone_secret: None,
            known_keys: Vec::new(),
            target: None,
            seen: Observed::default(),
        }
    }

    /// Ephemeral substitution towards the drone by an adversary that holds
    /// the drone's long-term key.
    pub fn key_compromise(view: PublicView, drone_secret: Scalar, rng: SimRng) -> Self {
        let mut a = Adversary::new(AdversaryKind::Mitm(MitmMode::Ephemerals), view, rng);
        a.drone_secret = Some(drone_secret);
        a
    }

    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }

    /// Session keys the adversary can compute.
    pub fn knows_key(&self, key: &SessionKey) -> bool {
        self.known_keys.contains(&key.key)
    }

    /// Resets per-session observations and picks the tamper target.
    pub fn begin_session(&mut self) {
        self.seen = Observed::default();
        self.known_keys.clear();
        self.target = match self.kind {
            AdversaryKind::TamperBit(TamperPolicy::AnyBit) => {
                let kind = MsgKind::ALL[self.rng.gen_range(0..8)];
                Some((kind, self.rng.gen_range(0..kind.size() * 8)))
            }
            AdversaryKind::TamperBit(TamperPolicy::ProofBits) => {
                let kind = [MsgKind::Msg5, MsgKind::Msg6, MsgKind::Msg7][self.rng.gen_range(0..3)];
                let off = kind.proof_offset().expect("proof-bearing message") * 8;
                Some((kind, off + self.rng.gen_range(0..PROOF_BYTES * 8)))
            }
            AdversaryKind::TamperBit(TamperPolicy::Bit { kind, bit }) => Some((kind, bit)),
            _ => None,
        };
    }

    /// Applies the adversary to one batch of envelopes sent together.
    /// Returns what reaches the channel and how many originals were
    /// withheld.
    pub fn intercept(&mut self, batch: Vec<Envelope>, now_us: u64) -> (Vec<Emission>, usize) {
        let now = timestamp_from_micros(now_us);
        for env in &batch {
            match decode(&env.bytes, env.kind) {
                Ok(WireMessage::Msg1(m)) if self.seen.msg1.is_none() => self.seen.msg1 = Some(m),
                Ok(WireMessage::Msg2(m)) if self.seen.msg2.is_none() => self.seen.msg2 = Some(m),
                _ => {}
            }
        }
        self.seen.sent += batch.len();
        let honest = |env: Envelope| Emission {
            env,
            origin: Origin::Honest,
            extra_delay_us: 0,
        };
        match self.kind {
            AdversaryKind::None | AdversaryKind::Mitm(MitmMode::Passive) => (batch.into_iter().map(honest).collect(), 0),
            AdversaryKind::Replay { delay_ms } => {
                let mut out = Vec::new();
                for env in batch {
                    out.push(Emission {
                        env: env.clone(),
                        origin: Origin::Replayed,
                        extra_delay_us: delay_ms * 1000,
                    });
                    out.push(honest(env));
                }
                (out, 0)
            }
            AdversaryKind::TamperBit(_) => {
                let mut withheld = 0;
                let mut out = Vec::new();
                for mut env in batch {
                    match self.target {
                        Some((kind, bit)) if kind == env.kind && !self.seen.done => {
                            self.seen.done = true;
                            withheld += 1;
                            env.bytes[bit / 8] ^= 0x80 >> (bit % 8);
                            out.push(Emission {
                                env,
                                origin: Origin::Tampered,
                                extra_delay_us: 0,
                            });
                        }
                        _ => out.push(honest(env)),
                    }
                }
                (out, withheld)
            }
            AdversaryKind::Mitm(MitmMode::Ephemerals) => self.substitute_ephemerals(batch, now),
            AdversaryKind::Mitm(MitmMode::PublicKeys) => {
                let target = if self.rng.gen_bool(0.5) { MsgKind::Msg1 } else { MsgKind::Msg2 };
                self.forge_init(batch, target, now)
            }
            AdversaryKind::Impersonate(Role::User) => self.forge_init(batch, MsgKind::Msg1, now),
            AdversaryKind::Impersonate(Role::Drone) => self.forge_init(batch, MsgKind::Msg2, now),
            AdversaryKind::Impersonate(Role::Server) => self.forge_server(batch, now),
        }
    }

    fn random_point(&mut self, base: &CurvePoint) -> (Scalar, CurvePoint) {
        loop {
            let a = Scalar::random(self.view.curve, &mut self.rng);
            if a.is_zero() {
                continue;
            }
            let p = base.mul(&a);
            if p.is_identity() {
                continue;
            }
            return if p.has_even_y() { (a, p) } else { (-a, -p) };
        }
    }

    fn lift(&self, x: &Point) -> Option<CurvePoint> {
        CurvePoint::from_xonly(self.view.curve, x).ok()
    }

    /// Replaces `x(R_2)` in Msg3 and `x(R_1)` in Msg4 with `a * P_s`, whose
    /// keys with the honest ephemerals the adversary can compute. Tokens it
    /// cannot compute are guessed with all-zero identities.
    fn substitute_ephemerals(&mut self, batch: Vec<Envelope>, now: u32) -> (Vec<Emission>, usize) {
        let m3 = batch.iter().find(|e| e.kind == MsgKind::Msg3).and_then(|e| decode(&e.bytes, e.kind).ok());
        let m4 = batch.iter().find(|e| e.kind == MsgKind::Msg4).and_then(|e| decode(&e.bytes, e.kind).ok());
        let (Some(WireMessage::Msg3(m3)), Some(WireMessage::Msg4(m4))) = (m3, m4) else {
            return (batch.into_iter().map(|env| Emission { env, origin: Origin::Honest, extra_delay_us: 0 }).collect(), 0);
        };
        let v = self.view;
        let (r1x, r2x) = (m4.r, m3.r);
        let (Some(big_r1), Some(big_r2)) = (self.lift(&r1x), self.lift(&r2x)) else {
            return (Vec::new(), batch.len());
        };
        let zero = [0u8; 16];
        let mut out = Vec::new();
        let mut withheld = 0;
        for env in batch {
            let forged = match env.kind {
                MsgKind::Msg3 if self.drone_secret.is_none() => {
                    let (a, ra) = self.random_point(&v.p_s);
                    let rax = ra.to_xonly().expect("non-identity");
                    let tr = tokens::transcript(&r1x, &rax, &v.sid, &v.p_s_x);
                    let Ok((sk, _)) = derive_session_key_with_point(&a, &big_r1, &tr) else {
                        continue;
                    };
                    self.known_keys.push(sk.key);
                    let p_u = self.seen.msg1.map(|m| m.p_u).unwrap_or_default();
                    let rid = self.seen.msg1.map(|m| m.rid).unwrap_or_default();
                    let isu = digest(&[b"zaps/i-su", &zero, &zero, &r1x, &v.p_s_x, &sk.key, &rax, &p_u]);
                    Some(WireMessage::Msg3(Msg3 {
                        sid: m3.sid,
                        uid: tokens::uid(&rid, &sk),
                        r: rax,
                        auth: AuthToken {
                            mac: m3.auth.mac,
                            kc: key_confirm(b"zaps/kc-su", &tokens::confirm_key(&sk), &[&isu]),
                        },
                    }))
                }
                MsgKind::Msg4 => {
                    let (b, rb) = self.random_point(&v.p_s);
                    let rbx = rb.to_xonly().expect("non-identity");
                    let tr = tokens::transcript(&rbx, &r2x, &v.sid, &v.p_s_x);
                    let Ok((sk, _)) = derive_session_key_with_point(&b, &big_r2, &tr) else {
                        continue;
                    };
                    self.known_keys.push(sk.key);
                    let isd = digest(&[b"zaps/i-sd", &zero, &zero, &r2x, &v.p_s_x, &sk.key, &rbx]);
                    let mut auth = AuthToken {
                        mac: m4.auth.mac,
                        kc: key_confirm(b"zaps/kc-sd", &tokens::confirm_key(&sk), &[&isd]),
                    };
                    if let Some(vd) = self.drone_secret {
                        // The compromised key gives the drone's ECDH share
                        // with the server; the credential is still guessed.
                        if let (Ok(smk), Some(m2)) = (ecdh(&vd, &v.p_s), self.seen.msg2) {
                            let k = tokens::master_key(Role::Drone, &smk, &tokens::drone_credential(&zero));
                            let salt = &m2.i_d[..16];
                            auth.mac = mac(b"zaps/mac-sd", &k, &[salt, &m4.sid, &m4.did, &rbx], now);
                        }
                    }
                    Some(WireMessage::Msg4(Msg4 {
                        sid: m4.sid,
                        did: m4.did,
                        r: rbx,
                        auth,
                    }))
                }
                _ => None,
            };
            match forged {
                Some(m) => {
                    withheld += 1;
                    out.push(Emission {
                        env: Envelope { bytes: encode(&m), ..env },
                        origin: Origin::Forged,
                        extra_delay_us: 0,
                    });
                }
                None => out.push(Emission {
                    env,
                    origin: Origin::Honest,
                    extra_delay_us: 0,
                }),
            }
        }
        (out, withheld)
    }

    /// Replaces Msg1 or Msg2 with one built on the adversary's own key pair
    /// and the observed alias, keyed with a guessed credential.
    fn forge_init(&mut self, batch: Vec<Envelope>, target: MsgKind, now: u32) -> (Vec<Emission>, usize) {
        let v = self.view;
        let mut out = Vec::new();
        let mut withheld = 0;
        for env in batch {
            if env.kind != target {
                out.push(Emission {
                    env,
                    origin: Origin::Honest,
                    extra_delay_us: 0,
                });
                continue;
            }
            let kp = gen_keypair(v.curve, &mut self.rng);
            let px = kp.public().to_xonly().expect("non-identity");
            let Ok(smk) = ecdh(kp.secret(), &v.p_s) else { continue };
            let mut salt = [0u8; 16];
            self.rng.fill(&mut salt);
            let m = match decode(&env.bytes, env.kind) {
                Ok(WireMessage::Msg1(m1)) => {
                    let k = tokens::master_key(Role::User, &smk, &digest(&[&m1.rid]));
                    let tag = mac(b"zaps/i-u", &k, &[&salt, &px, &m1.rid], now);
                    let mut i_u = [0u8; 32];
                    i_u[..16].copy_from_slice(&salt);
                    i_u[16..].copy_from_slice(&tag[..16]);
                    WireMessage::Msg1(Msg1 { p_u: px, rid: m1.rid, i_u })
                }
                Ok(WireMessage::Msg2(m2)) => {
                    let k = tokens::master_key(Role::Drone, &smk, &digest(&[&m2.did]));
                    let (_, r2) = tokens::session_nonce(v.curve, Role::Drone, &k, &salt, &v.p_s);
                    let r2x = r2.to_xonly().expect("non-identity");
                    let tag = mac(b"zaps/i-d", &k, &[&salt, &r2x, &px, &m2.did], now);
                    let mut i_d = [0u8; 32];
                    i_d[..16].copy_from_slice(&salt);
                    i_d[16..].copy_from_slice(&tag[..16]);
                    WireMessage::Msg2(Msg2 {
                        p_d: px,
                        did: m2.did,
                        i_d,
                        auth: AuthToken {
                            mac: mac(b"zaps/mac-d", &k, &[&px, &m2.did, &i_d], now),
                            kc: key_confirm(b"zaps/kc-d", &k, &[&i_d, &r2x]),
                        },
                    })
                }
                _ => {
                    out.push(Emission {
                        env,
                        origin: Origin::Honest,
                        extra_delay_us: 0,
                    });
                    continue;
                }
            };
            withheld += 1;
            out.push(Emission {
                env: Envelope { bytes: encode(&m), ..env },
                origin: Origin::Forged,
                extra_delay_us: 0,
            });
        }
        (out, withheld)
    }

    /// Answers the init messages as a fake server with its own key pair.
    fn forge_server(&mut self, batch: Vec<Envelope>, now: u32) -> (Vec<Emission>, usize) {
        let v = self.view;
        let mut out = Vec::new();
        let mut withheld = 0;
        let fake = gen_keypair(v.curve, &mut self.rng);
        for env in batch {
            let m = match env.kind {
                MsgKind::Msg3 => {
                    let (_, ra) = self.random_point(&CurvePoint::generator(v.curve));
                    let rax = ra.to_xonly().expect("non-identity");
                    let m1 = self.seen.msg1.unwrap_or_default();
                    let k = self
                        .lift(&m1.p_u)
                        .and_then(|p| ecdh(fake.secret(), &p).ok())
                        .map(|smk| tokens::master_key(Role::User, &smk, &digest(&[&m1.rid])))
                        .unwrap_or_default();
                    let mut uid = [0u8; 16];
                    self.rng.fill(&mut uid);
                    let mut kc = [0u8; 32];
                    self.rng.fill(&mut kc);
                    WireMessage::Msg3(Msg3 {
                        sid: v.sid,
                        uid,
                        r: rax,
                        auth: AuthToken {
                            mac: mac(b"zaps/mac-su", &k, &[&m1.i_u[..16], &v.sid, &uid, &rax], now),
                            kc,
                        },
                    })
                }
                MsgKind::Msg4 => {
                    let (_, rb) = self.random_point(&CurvePoint::generator(v.curve));
                    let rbx = rb.to_xonly().expect("non-identity");
                    let m2 = self.seen.msg2.unwrap_or_default();
                    let k = self
                        .lift(&m2.p_d)
                        .and_then(|p| ecdh(fake.secret(), &p).ok())
                        .map(|smk| tokens::master_key(Role::Drone, &smk, &digest(&[&m2.did])))
                        .unwrap_or_default();
                    let mut kc = [0u8; 32];
                    self.rng.fill(&mut kc);
                    WireMessage::Msg4(Msg4 {
                        sid: v.sid,
                        did: m2.did,
                        r: rbx,
                        auth: AuthToken {
                            mac: mac(b"zaps/mac-sd", &k, &[&m2.i_d[..16], &v.sid, &m2.did, &rbx], now),
                            kc,
                        },
                    })
                }
                _ => {
                    out.push(Emission {
                        env,
                        origin: Origin::Honest,
                        extra_delay_us: 0,
                    });
                    continue;
                }
            };
            withheld += 1;
            out.push(Emission {
                env: Envelope { bytes: encode(&m), ..env },
                origin: Origin::Forged,
                extra_delay_us: 0,
            });
        }
        (out, withheld)
    }
}
