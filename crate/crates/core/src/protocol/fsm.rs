//! The protocol operations. Each public function checks role and phase,
//! runs its body and routes any error through [`SessionContext::fail`].

use rand::{CryptoRng, RngCore};

use super::context::{Leg, SessionContext};
use super::setup::{Mission, SystemParams};
use super::tokens::{self, digest, key_confirm, leg_key, mac, proof_context, round_bytes};
use super::{check_freshness, Phase, ProtocolError, Role, Timestamp, INIT_LOOKBACK};
use crate::arith::{CurvePoint, Fq, Scalar};
use crate::kex::{derive_session_key_with_point, ecdh, SessionKey};
use crate::snark::circuit::expected_constraints;
use crate::snark::pinocchio::gen_proof_blinded;
use crate::snark::{
    commit, route_accumulator, schnorr_prove, schnorr_verify_recover, verproof, Backend, FlightPath, SnarkProof,
    Statement,
};
use crate::wire::{encode, AuthToken, Msg1, Msg2, Msg3, Msg4, Msg5, Msg6, Msg7, Msg8, Point, WireMessage};

fn run<T>(
    ctx: &mut SessionContext,
    f: impl FnOnce(&mut SessionContext) -> Result<T, ProtocolError>,
) -> Result<T, ProtocolError> {
    let r = f(&mut *ctx);
    r.map_err(|e| ctx.fail(e))
}

enum TimeMatch {
    Fresh(Timestamp),
    Stale,
    Invalid,
}

/// Searches the implicit timestamp of a token. Candidates inside the window
/// around `now` are fresh; older ones back to `from` mark a replay.
fn match_time(now: Timestamp, window: u32, from: Timestamp, ok: impl Fn(Timestamp) -> bool) -> TimeMatch {
    let lo = now.saturating_sub(window.saturating_sub(1));
    if window > 0 {
        let hi = now.saturating_add(window - 1);
        if let Some(t) = (lo..=hi).find(|t| ok(*t)) {
            return TimeMatch::Fresh(t);
        }
    }
    let stale_end = if window > 0 { lo } else { now.saturating_add(1) };
    if (from.min(stale_end)..stale_end).any(ok) {
        return TimeMatch::Stale;
    }
    TimeMatch::Invalid
}

fn lift(params: &SystemParams, x: &Point) -> Option<CurvePoint> {
    CurvePoint::from_xonly(params.curve, x).ok()
}

fn xonly(p: &CurvePoint) -> Point {
    p.to_xonly().expect("protocol points are never the identity")
}

fn nonce_tag(role: Role, alias: &[u8], r: &Scalar) -> [u8; 32] {
    digest(&[b"zaps/nonce", &[role.code()], alias, &r.to_be_bytes()])
}

fn salt_tag(role: Role, alias: &[u8], salt: &[u8; 16]) -> [u8; 32] {
    digest(&[b"zaps/salt", &[role.code()], alias, salt])
}

fn seen_tag(label: &[u8], body: &[u8]) -> [u8; 32] {
    digest(&[b"zaps/seen", label, body])
}

fn proof_digest(p: &SnarkProof) -> [u8; 32] {
    digest(&[b"zaps/proof", &p.0])
}

fn mission_statement(m: &Mission) -> Statement {
    let g = m.geofence;
    Statement {
        public_inputs: vec![
            Fq::new(g.x_min as u64),
            Fq::new(g.x_max as u64),
            Fq::new(g.y_min as u64),
            Fq::new(g.y_max as u64),
            m.acc_out,
        ],
    }
}

/// Commits to `path` and proves it under `role`'s key for `round`. Returns
/// the envelope and `x(C)`.
fn make_proof<R: RngCore + CryptoRng>(
    params: &SystemParams,
    role: Role,
    mission: &Mission,
    path: &FlightPath,
    sk: &SessionKey,
    round: usize,
    rng: &mut R,
) -> Result<(SnarkProof, Point), ProtocolError> {
    let circuit = params.circuit(mission.geofence, mission.route_len)?;
    let w = circuit.witness(path)?;
    if route_accumulator(path) != mission.acc_out {
        return Err(ProtocolError::WitnessInvalid {
            constraint: expected_constraints(mission.route_len) - 1,
        });
    }
    // Small test curves can hit the identity; redraw.
    let (r, c) = loop {
        let r = Scalar::random(params.curve, rng);
        if r.is_zero() {
            continue;
        }
        let c = commit(path, &r)?;
        if !c.point.is_identity() {
            break (r, c);
        }
    };
    let proof = match params.backend {
        Backend::Schnorr => schnorr_prove(&c, path, &r, &proof_context(role, round, sk), rng)?,
        Backend::Qap => {
            let keys = params.keyring.get(role, mission.route_len)?;
            gen_proof_blinded(&keys.0, &circuit.statement(mission.acc_out), &w, rng)?.to_envelope()
        }
    };
    Ok((proof, xonly(&c.point)))
}

fn verify_proof(
    params: &SystemParams,
    role: Role,
    mission: &Mission,
    sk: &SessionKey,
    round: usize,
    proof: &SnarkProof,
) -> Result<bool, ProtocolError> {
    Ok(match params.backend {
        Backend::Schnorr => schnorr_verify_recover(params.curve, proof, &proof_context(role, round, sk)).is_some(),
        Backend::Qap => {
            let keys = params.keyring.get(role, mission.route_len)?;
            verproof(&keys.1, &mission_statement(mission), proof)
        }
    })
}

fn mission(ctx: &SessionContext) -> Result<(Mission, Option<FlightPath>), ProtocolError> {
    let m = ctx.mission.ok_or(ProtocolError::MissingMission)?;
    Ok((m, ctx.witness.clone()))
}

fn random_bytes<const N: usize, R: RngCore>(rng: &mut R) -> [u8; N] {
    let mut b = [0u8; N];
    rng.fill_bytes(&mut b);
    b
}

// ---------------------------------------------------------------------------
// Initialisation

fn init_tag(label: &[u8], k: &[u8; 32], salt: &[u8], fields: &[&[u8]], t: Timestamp) -> [u8; 16] {
    let d = mac(label, k, &[&[salt], fields].concat(), t);
    d[..16].try_into().unwrap()
}

fn join_i(salt: &[u8; 16], tag: &[u8; 16]) -> [u8; 32] {
    let mut i = [0u8; 32];
    i[..16].copy_from_slice(salt);
    i[16..].copy_from_slice(tag);
    i
}

/// Draws the salt and session nonce and stores the master key.
fn begin<R: RngCore + CryptoRng>(ctx: &mut SessionContext, rng: &mut R, now: Timestamp) -> Result<(), ProtocolError> {
    let kp = ctx.keypair.ok_or(ProtocolError::MissingMission)?;
    let smk = ecdh(kp.secret(), &ctx.params.p_s)?;
    let k = tokens::master_key(ctx.role, &smk, &ctx.credential);
    let salt: [u8; 16] = random_bytes(rng);
    let (r, big_r) = tokens::session_nonce(ctx.params.curve, ctx.role, &k, &salt, &ctx.params.p_s);
    if !ctx.nonces.insert(nonce_tag(ctx.role, &ctx.alias(), &r)) {
        return Err(ProtocolError::NonceReuse);
    }
    ctx.s.k_master = Some(k);
    ctx.s.salt = Some(salt);
    ctx.s.nonce = Some(r);
    ctx.s.ephemeral = Some(big_r);
    ctx.s.t_start = Some(now);
    ctx.s.t_last = Some(now);
    ctx.phase = Phase::InitSent;
    Ok(())
}

/// Msg1 = P_u, RID_u, I_u with `I_u = salt || H(K_us, salt, P_u, RID_u, T0)`.
pub fn user_begin_init<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    rng: &mut R,
    now: Timestamp,
) -> Result<Msg1, ProtocolError> {
    ctx.guard("user_begin_init", Role::User, &[Phase::Registered], false)?;
    run(ctx, |ctx| {
        begin(ctx, rng, now)?;
        let (k, salt) = (ctx.k_master()?, ctx.s.salt.unwrap());
        let (p_u, rid) = (ctx.public_x(), ctx.alias());
        let tag = init_tag(b"zaps/i-u", &k, &salt, &[&p_u, &rid], now);
        Ok(Msg1 {
            p_u,
            rid,
            i_u: join_i(&salt, &tag),
        })
    })
}

fn drone_init_fields(k: &[u8; 32], p_d: &Point, did: &[u8; 16], salt: &[u8; 16], r2: &Point, t: Timestamp) -> ([u8; 32], AuthToken) {
    let tag = init_tag(b"zaps/i-d", k, salt, &[r2, p_d, did], t);
    let i_d = join_i(salt, &tag);
    let auth = AuthToken {
        mac: mac(b"zaps/mac-d", k, &[p_d, did, &i_d], t),
        kc: key_confirm(b"zaps/kc-d", k, &[&i_d, r2]),
    };
    (i_d, auth)
}

/// Msg2 = P_d, DID_d, I_d, Auth_d. `I_d` binds `x(R_2)` so the server can
/// check the nonce it rederives.
pub fn drone_begin_init<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    rng: &mut R,
    now: Timestamp,
) -> Result<Msg2, ProtocolError> {
    ctx.guard("drone_begin_init", Role::Drone, &[Phase::Registered], false)?;
    run(ctx, |ctx| {
        begin(ctx, rng, now)?;
        let (k, salt) = (ctx.k_master()?, ctx.s.salt.unwrap());
        let (p_d, did) = (ctx.public_x(), ctx.alias());
        let r2 = xonly(&ctx.s.ephemeral.unwrap());
        let (i_d, auth) = drone_init_fields(&k, &p_d, &did, &salt, &r2, now);
        Ok(Msg2 { p_d, did, i_d, auth })
    })
}

fn i_su(id_s: &[u8], id_u: &[u8], r1: &Point, p_s: &Point, sk: &SessionKey, r2: &Point, p_u: &Point) -> [u8; 32] {
    digest(&[b"zaps/i-su", id_s, id_u, r1, p_s, &sk.key, r2, p_u])
}

fn i_sd(id_s: &[u8], id_d: &[u8], r2: &Point, p_s: &Point, sk: &SessionKey, r1: &Point) -> [u8; 32] {
    digest(&[b"zaps/i-sd", id_s, id_d, r2, p_s, &sk.key, r1])
}

/// Verifies both init messages, rederives both nonces, computes the session
/// key and answers each leg with the other leg's ephemeral.
pub fn server_process_init<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    msg1: &Msg1,
    msg2: &Msg2,
    _rng: &mut R,
    now: Timestamp,
) -> Result<(Msg3, Msg4), ProtocolError> {
    ctx.guard("server_process_init", Role::Server, &[Phase::Registered], true)?;
    run(ctx, |ctx| {
        let params = ctx.params.clone();
        let secrets = ctx.server.clone().ok_or(ProtocolError::UnknownEntity)?;
        let (urec, drec) = {
            let dir = secrets.directory.lock().expect("directory lock");
            let u = dir.users.get(&msg1.rid).cloned().ok_or(ProtocolError::UnknownEntity)?;
            let d = dir.drones.get(&msg2.did).cloned().ok_or(ProtocolError::UnknownEntity)?;
            (u, d)
        };
        let from = now.saturating_sub(INIT_LOOKBACK);
        let window = params.delta_t;

        // User leg.
        let p_u = lift(&params, &msg1.p_u).ok_or(ProtocolError::AuthFailure)?;
        if p_u != urec.public {
            return Err(ProtocolError::AuthFailure);
        }
        let smk_u = ecdh(secrets.keypair.secret(), &p_u).map_err(|_| ProtocolError::AuthFailure)?;
        let k_us = tokens::master_key(Role::User, &smk_u, &urec.credential);
        let salt_u: [u8; 16] = msg1.i_u[..16].try_into().unwrap();
        let tag_u = &msg1.i_u[16..];
        match match_time(now, window, from, |t| {
            init_tag(b"zaps/i-u", &k_us, &salt_u, &[&msg1.p_u, &msg1.rid], t) == tag_u
        }) {
            TimeMatch::Fresh(_) => {}
            TimeMatch::Stale => return Err(ProtocolError::ReplayReject),
            TimeMatch::Invalid => return Err(ProtocolError::AuthFailure),
        }

        // Drone leg.
        let p_d = lift(&params, &msg2.p_d).ok_or(ProtocolError::AuthFailure)?;
        if p_d != drec.public {
            return Err(ProtocolError::AuthFailure);
        }
        let smk_d = ecdh(secrets.keypair.secret(), &p_d).map_err(|_| ProtocolError::AuthFailure)?;
        let k_ds = tokens::master_key(Role::Drone, &smk_d, &drec.credential);
        let salt_d: [u8; 16] = msg2.i_d[..16].try_into().unwrap();
        let (_, big_r2) = tokens::session_nonce(params.curve, Role::Drone, &k_ds, &salt_d, &params.p_s);
        let r2x = xonly(&big_r2);
        match match_time(now, window, from, |t| {
            drone_init_fields(&k_ds, &msg2.p_d, &msg2.did, &salt_d, &r2x, t) == (msg2.i_d, msg2.auth)
        }) {
            TimeMatch::Fresh(_) => {}
            TimeMatch::Stale => return Err(ProtocolError::ReplayReject),
            TimeMatch::Invalid => return Err(ProtocolError::AuthFailure),
        }

        // A reused salt replays a consumed transcript.
        let su = salt_tag(Role::User, &msg1.rid, &salt_u);
        let sd = salt_tag(Role::Drone, &msg2.did, &salt_d);
        if ctx.nonces.contains(&su) || ctx.nonces.contains(&sd) {
            return Err(ProtocolError::AuthFailure);
        }
        ctx.nonces.insert(su);
        ctx.nonces.insert(sd);

        let (r1, big_r1) = tokens::session_nonce(params.curve, Role::User, &k_us, &salt_u, &params.p_s);
        let r1x = xonly(&big_r1);
        let transcript = tokens::transcript(&r1x, &r2x, &params.sid, &params.p_s_x);
        let (sk, shared) = derive_session_key_with_point(&r1, &big_r2, &transcript)?;
        let uid = tokens::uid(&msg1.rid, &sk);

        let kc_key = tokens::confirm_key(&sk);
        let isu = i_su(&params.id_s, &urec.id, &r1x, &params.p_s_x, &sk, &r2x, &msg1.p_u);
        let msg3 = Msg3 {
            sid: params.sid,
            uid,
            r: r2x,
            auth: AuthToken {
                mac: mac(b"zaps/mac-su", &k_us, &[&salt_u, &params.sid, &uid, &r2x], now),
                kc: key_confirm(b"zaps/kc-su", &kc_key, &[&isu]),
            },
        };
        let isd = i_sd(&params.id_s, &drec.id, &r2x, &params.p_s_x, &sk, &r1x);
        let msg4 = Msg4 {
            sid: params.sid,
            did: msg2.did,
            r: r1x,
            auth: AuthToken {
                mac: mac(b"zaps/mac-sd", &k_ds, &[&salt_d, &params.sid, &msg2.did, &r1x], now),
                kc: key_confirm(b"zaps/kc-sd", &kc_key, &[&isd]),
            },
        };

        ctx.s.legs = Some((
            Leg {
                alias: msg1.rid,
                public_x: msg1.p_u,
                k_master: k_us,
            },
            Leg {
                alias: msg2.did,
                public_x: msg2.p_d,
                k_master: k_ds,
            },
        ));
        ctx.s.sk = Some(sk);
        ctx.s.sk_point = Some(*shared.point());
        ctx.s.uid = Some(uid);
        ctx.s.t_start = Some(now);
        ctx.s.t_auth = Some(now);
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::Authenticated;
        Ok((msg3, msg4))
    })
}

/// Session key from the relayed ephemeral. Returns the key and shared point.
fn accept_ephemeral(ctx: &SessionContext, peer_x: &Point) -> Result<(SessionKey, CurvePoint, CurvePoint), ProtocolError> {
    let params = &ctx.params;
    let peer = lift(params, peer_x).ok_or(ProtocolError::KeyConfirmFailure)?;
    let own = ctx.s.ephemeral.ok_or(ProtocolError::KeyConfirmFailure)?;
    let nonce = ctx.s.nonce.ok_or(ProtocolError::KeyConfirmFailure)?;
    let own_x = xonly(&own);
    let transcript = match ctx.role {
        Role::User => tokens::transcript(&own_x, peer_x, &params.sid, &params.p_s_x),
        _ => tokens::transcript(peer_x, &own_x, &params.sid, &params.p_s_x),
    };
    let (sk, shared) = derive_session_key_with_point(&nonce, &peer, &transcript).map_err(|_| ProtocolError::KeyConfirmFailure)?;
    Ok((sk, *shared.point(), peer))
}

fn timed_mac(ctx: &SessionContext, now: Timestamp, ok: impl Fn(Timestamp) -> bool) -> Result<Timestamp, ProtocolError> {
    let from = ctx.s.t_start.unwrap_or(now);
    match match_time(now, ctx.params.delta_t, from, ok) {
        TimeMatch::Fresh(t) => Ok(t),
        TimeMatch::Stale => Err(ProtocolError::ReplayReject),
        TimeMatch::Invalid => Err(ProtocolError::AuthFailure),
    }
}

/// Handles Msg3. Key confirmation is checked first so that a substituted
/// ephemeral surfaces as a key-confirmation failure.
pub fn user_accept_auth(ctx: &mut SessionContext, msg3: &Msg3, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("user_accept_auth", Role::User, &[Phase::InitSent], true)?;
    run(ctx, |ctx| {
        let (sk, point, peer) = accept_ephemeral(ctx, &msg3.r)?;
        let params = ctx.params.clone();
        let id = ctx.identity.unwrap();
        let r1x = xonly(&ctx.s.ephemeral.unwrap());
        let isu = i_su(&params.id_s, &id.id, &r1x, &params.p_s_x, &sk, &msg3.r, &ctx.public_x());
        if key_confirm(b"zaps/kc-su", &tokens::confirm_key(&sk), &[&isu]) != msg3.auth.kc {
            return Err(ProtocolError::KeyConfirmFailure);
        }
        if msg3.uid != tokens::uid(&id.alias, &sk) || msg3.sid != params.sid {
            return Err(ProtocolError::AuthFailure);
        }
        let (k, salt) = (ctx.k_master()?, ctx.s.salt.unwrap());
        timed_mac(ctx, now, |t| {
            mac(b"zaps/mac-su", &k, &[&salt, &msg3.sid, &msg3.uid, &msg3.r], t) == msg3.auth.mac
        })?;
        ctx.s.sk = Some(sk);
        ctx.s.sk_point = Some(point);
        ctx.s.peer_ephemeral = Some(peer);
        ctx.s.uid = Some(msg3.uid);
        ctx.s.t_auth = Some(now);
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::Authenticated;
        Ok(())
    })
}

pub fn drone_accept_auth(ctx: &mut SessionContext, msg4: &Msg4, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("drone_accept_auth", Role::Drone, &[Phase::InitSent], true)?;
    run(ctx, |ctx| {
        let (sk, point, peer) = accept_ephemeral(ctx, &msg4.r)?;
        let params = ctx.params.clone();
        let id = ctx.identity.unwrap();
        let r2x = xonly(&ctx.s.ephemeral.unwrap());
        let isd = i_sd(&params.id_s, &id.id, &r2x, &params.p_s_x, &sk, &msg4.r);
        if key_confirm(b"zaps/kc-sd", &tokens::confirm_key(&sk), &[&isd]) != msg4.auth.kc {
            return Err(ProtocolError::KeyConfirmFailure);
        }
        if msg4.did != id.alias || msg4.sid != params.sid {
            return Err(ProtocolError::AuthFailure);
        }
        let (k, salt) = (ctx.k_master()?, ctx.s.salt.unwrap());
        timed_mac(ctx, now, |t| {
            mac(b"zaps/mac-sd", &k, &[&salt, &msg4.sid, &msg4.did, &msg4.r], t) == msg4.auth.mac
        })?;
        ctx.s.sk = Some(sk);
        ctx.s.sk_point = Some(point);
        ctx.s.peer_ephemeral = Some(peer);
        ctx.s.t_auth = Some(now);
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::Authenticated;
        Ok(())
    })
}

/// Cross-checks the user and drone keys. Both contexts fail on a mismatch
/// or when the freshness window has passed since authentication.
pub fn finalize_session_keys(user: &mut SessionContext, drone: &mut SessionContext, now: Timestamp) -> Result<(), ProtocolError> {
    user.guard("finalize_session_keys", Role::User, &[Phase::Authenticated], false)?;
    drone.guard("finalize_session_keys", Role::Drone, &[Phase::Authenticated], false)?;
    if user.s.round != 0 {
        return Err(ProtocolError::ProtocolViolation {
            op: "finalize_session_keys",
            role: Role::User,
            phase: user.phase,
        });
    }
    let check = || -> Result<(), ProtocolError> {
        let dt = user.params.delta_t;
        for c in [&*user, &*drone] {
            if !check_freshness(c.s.t_auth.unwrap_or(0), now, dt) {
                return Err(ProtocolError::StaleAbort);
            }
        }
        if user.s.sk != drone.s.sk || user.s.sk_point != drone.s.sk_point || user.s.sk.is_none() {
            return Err(ProtocolError::KeyConfirmFailure);
        }
        Ok(())
    };
    check().inspect_err(|e| {
        user.fail(e.clone());
        drone.fail(e.clone());
    })
}

// ---------------------------------------------------------------------------
// Proof phase

/// Msg5 = P_u, RID_u, I_u, pi_u, Auth_u, T1 with
/// `I_u = H(pi_u || C_u || SK || SRK || T1 || r4)`; SRK is the transcript tag.
pub fn user_prove_path<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    path: &FlightPath,
    backend: Backend,
    rng: &mut R,
    now: Timestamp,
) -> Result<Msg5, ProtocolError> {
    ctx.guard("user_prove_path", Role::User, &[Phase::Authenticated], false)?;
    if backend != ctx.params.backend {
        return Err(ProtocolError::ProtocolViolation {
            op: "user_prove_path",
            role: Role::User,
            phase: ctx.phase,
        });
    }
    run(ctx, |ctx| {
        let (m, _) = mission(ctx)?;
        let sk = ctx.sk()?;
        let round = ctx.s.round;
        let (proof, cx) = make_proof(&ctx.params, Role::User, &m, path, &sk, round, rng)?;
        let r4: [u8; 32] = random_bytes(rng);
        let i_u = digest(&[b"zaps/i-u5", &proof.0, &cx, &sk.key, sk.tag.as_bytes(), &now.to_be_bytes(), &r4]);
        let (p_u, rid) = (ctx.public_x(), ctx.alias());
        let key = leg_key(&sk, &ctx.k_master()?);
        let rb = round_bytes(round);
        let auth = AuthToken {
            mac: mac(b"zaps/mac-5", &key, &[&p_u, &rid, &i_u, &proof.0, &rb], now),
            kc: key_confirm(b"zaps/kc-5", &sk.key, &[&i_u, &rb, &now.to_be_bytes()]),
        };
        ctx.s.pi_s = None;
        ctx.s.pi_d = None;
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::ProofSent;
        Ok(Msg5 {
            p_u,
            rid,
            i_u,
            proof,
            auth,
            t1: now,
        })
    })
}

fn msg6_tokens(key: &[u8; 32], sk: &SessionKey, m: &Msg6, round: usize, t: Timestamp) -> ([u8; 32], [u8; 32]) {
    let rb = round_bytes(round);
    (
        mac(b"zaps/mac-6", key, &[&m.p_s, &m.i_s, &m.proof.0, &rb], t),
        key_confirm(b"zaps/kc-6", &sk.key, &[&m.i_s, &m.proof.0, &rb, &t.to_be_bytes()]),
    )
}

/// Checks Msg5 in the order identity, freshness, proof, tokens, then
/// proves the server's own path to the drone.
pub fn server_process_proof<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    msg5: &Msg5,
    rng: &mut R,
    now: Timestamp,
) -> Result<Msg6, ProtocolError> {
    ctx.guard("server_process_proof", Role::Server, &[Phase::Authenticated, Phase::ProofSent], true)?;
    run(ctx, |ctx| {
        let (m, witness) = mission(ctx)?;
        let round = ctx.s.round;
        if ctx.phase == Phase::ProofSent && round >= m.rounds {
            return Err(ProtocolError::ReplayReject);
        }
        let params = ctx.params.clone();
        let sk = ctx.sk()?;
        let (ul, dl) = ctx.s.legs.clone().ok_or(ProtocolError::AuthFailure)?;
        if msg5.rid != ul.alias || msg5.p_u != ul.public_x {
            return Err(ProtocolError::AuthFailure);
        }
        let start = ctx.s.t_start.unwrap_or(now);
        if !check_freshness(msg5.t1, now, params.delta_t) || msg5.t1 < start {
            return Err(ProtocolError::ReplayReject);
        }
        let seen = seen_tag(b"msg5", &msg5.i_u);
        if ctx.nonces.contains(&seen) {
            return Err(ProtocolError::ReplayReject);
        }
        if !verify_proof(&params, Role::User, &m, &sk, round, &msg5.proof)? {
            return Err(ProtocolError::ProofReject);
        }
        let rb = round_bytes(round);
        let key = leg_key(&sk, &ul.k_master);
        let good_mac = mac(b"zaps/mac-5", &key, &[&msg5.p_u, &msg5.rid, &msg5.i_u, &msg5.proof.0, &rb], msg5.t1);
        let good_kc = key_confirm(b"zaps/kc-5", &sk.key, &[&msg5.i_u, &rb, &msg5.t1.to_be_bytes()]);
        if good_mac != msg5.auth.mac || good_kc != msg5.auth.kc {
            return Err(ProtocolError::AuthFailure);
        }
        ctx.nonces.insert(seen);

        let path = witness.ok_or(ProtocolError::MissingMission)?;
        let (proof, _) = make_proof(&params, Role::Server, &m, &path, &sk, round, rng)?;
        let r5: [u8; 32] = random_bytes(rng);
        let i_s = digest(&[b"zaps/i-s", &proof.0, &encode(&WireMessage::Msg5(*msg5)), &r5]);
        let mut msg6 = Msg6 {
            auth: AuthToken::default(),
            p_s: params.p_s_x,
            i_s,
            proof,
        };
        let (mac6, kc6) = msg6_tokens(&leg_key(&sk, &dl.k_master), &sk, &msg6, round, now);
        msg6.auth = AuthToken { mac: mac6, kc: kc6 };
        ctx.s.round = round + 1;
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::ProofSent;
        Ok(msg6)
    })
}

/// The user sees Msg6 on the broadcast link and checks the server proof and
/// the key-confirmation digest. The MAC is keyed for the drone.
pub fn user_observe_server_proof(ctx: &mut SessionContext, msg6: &Msg6, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("user_observe_server_proof", Role::User, &[Phase::ProofSent], true)?;
    if ctx.s.pi_s.is_some() {
        return Err(ctx.fail(ProtocolError::ReplayReject));
    }
    run(ctx, |ctx| {
        let (m, _) = mission(ctx)?;
        let params = ctx.params.clone();
        let sk = ctx.sk()?;
        let round = ctx.s.round;
        if msg6.p_s != params.p_s_x {
            return Err(ProtocolError::AuthFailure);
        }
        let rb = round_bytes(round);
        let tm = match_time(now, params.delta_t, ctx.s.t_start.unwrap_or(now), |t| {
            key_confirm(b"zaps/kc-6", &sk.key, &[&msg6.i_s, &msg6.proof.0, &rb, &t.to_be_bytes()]) == msg6.auth.kc
        });
        if let TimeMatch::Stale = tm {
            return Err(ProtocolError::ReplayReject);
        }
        if !verify_proof(&params, Role::Server, &m, &sk, round, &msg6.proof)? {
            return Err(ProtocolError::ProofReject);
        }
        if let TimeMatch::Invalid = tm {
            return Err(ProtocolError::AuthFailure);
        }
        ctx.s.pi_s = Some(proof_digest(&msg6.proof));
        Ok(())
    })
}

fn msg7_tokens(sk: &SessionKey, m: &Msg7, pi_s: &[u8; 32], round: usize, t: Timestamp) -> ([u8; 32], [u8; 32]) {
    let rb = round_bytes(round);
    (
        mac(b"zaps/mac-7", &sk.key, &[&m.p_d, &m.did, &m.i_d, &m.proof.0, &rb], t),
        key_confirm(b"zaps/kc-7", &sk.key, &[&m.i_d, pi_s, &rb, &t.to_be_bytes()]),
    )
}

/// Checks Msg6 (replay, proof, tokens) and answers with the drone's proof.
pub fn drone_process_server_proof<R: RngCore + CryptoRng>(
    ctx: &mut SessionContext,
    msg6: &Msg6,
    rng: &mut R,
    now: Timestamp,
) -> Result<Msg7, ProtocolError> {
    ctx.guard(
        "drone_process_server_proof",
        Role::Drone,
        &[Phase::Authenticated, Phase::ProofSent],
        true,
    )?;
    run(ctx, |ctx| {
        let (m, witness) = mission(ctx)?;
        let round = ctx.s.round;
        if ctx.phase == Phase::ProofSent && round >= m.rounds {
            return Err(ProtocolError::ReplayReject);
        }
        let params = ctx.params.clone();
        let sk = ctx.sk()?;
        if msg6.p_s != params.p_s_x {
            return Err(ProtocolError::AuthFailure);
        }
        let key = leg_key(&sk, &ctx.k_master()?);
        let tm = match_time(now, params.delta_t, ctx.s.t_start.unwrap_or(now), |t| {
            msg6_tokens(&key, &sk, msg6, round, t) == (msg6.auth.mac, msg6.auth.kc)
        });
        let seen = seen_tag(b"msg6", &msg6.i_s);
        if matches!(tm, TimeMatch::Stale) || ctx.nonces.contains(&seen) {
            return Err(ProtocolError::ReplayReject);
        }
        if !verify_proof(&params, Role::Server, &m, &sk, round, &msg6.proof)? {
            return Err(ProtocolError::ProofReject);
        }
        if let TimeMatch::Invalid = tm {
            return Err(ProtocolError::AuthFailure);
        }
        ctx.nonces.insert(seen);

        let path = witness.ok_or(ProtocolError::MissingMission)?;
        let (proof, cx) = make_proof(&params, Role::Drone, &m, &path, &sk, round, rng)?;
        let pi_s = proof_digest(&msg6.proof);
        let r6: [u8; 32] = random_bytes(rng);
        let i_d = digest(&[b"zaps/i-d7", &proof.0, &cx, &sk.key, &pi_s, &r6]);
        let mut msg7 = Msg7 {
            p_d: ctx.public_x(),
            did: ctx.alias(),
            i_d,
            proof,
            auth: AuthToken::default(),
        };
        let (mac7, kc7) = msg7_tokens(&sk, &msg7, &pi_s, round, now);
        msg7.auth = AuthToken { mac: mac7, kc: kc7 };
        ctx.s.pi_s = Some(pi_s);
        ctx.s.pi_d = Some(proof_digest(&msg7.proof));
        ctx.s.round = round + 1;
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::ProofSent;
        Ok(msg7)
    })
}

fn user_check_msg7(ctx: &mut SessionContext, msg7: &Msg7, now: Timestamp, last: bool, op: &'static str) -> Result<(), ProtocolError> {
    let (m, _) = mission(ctx)?;
    let round = ctx.s.round;
    if (round + 1 == m.rounds) != last {
        return Err(ProtocolError::ProtocolViolation {
            op,
            role: Role::User,
            phase: ctx.phase,
        });
    }
    let pi_s = ctx.s.pi_s.ok_or(ProtocolError::ProofReject)?;
    let params = ctx.params.clone();
    let sk = ctx.sk()?;
    if let Some((p_d, did)) = ctx.s.drone_peer {
        if (p_d, did) != (msg7.p_d, msg7.did) {
            return Err(ProtocolError::AuthFailure);
        }
    }
    let tm = match_time(now, params.delta_t, ctx.s.t_start.unwrap_or(now), |t| {
        msg7_tokens(&sk, msg7, &pi_s, round, t) == (msg7.auth.mac, msg7.auth.kc)
    });
    let seen = seen_tag(b"msg7", &msg7.i_d);
    if matches!(tm, TimeMatch::Stale) || ctx.nonces.contains(&seen) {
        return Err(ProtocolError::ReplayReject);
    }
    if !verify_proof(&params, Role::Drone, &m, &sk, round, &msg7.proof)? {
        return Err(ProtocolError::ProofReject);
    }
    if let TimeMatch::Invalid = tm {
        return Err(ProtocolError::AuthFailure);
    }
    ctx.nonces.insert(seen);
    ctx.s.drone_peer = Some((msg7.p_d, msg7.did));
    ctx.s.pi_d = Some(proof_digest(&msg7.proof));
    ctx.s.t_last = Some(now);
    Ok(())
}

/// Accepts the drone proof of a non-final round and returns to
/// `Authenticated` for the next one.
pub fn user_accept_round(ctx: &mut SessionContext, msg7: &Msg7, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("user_accept_round", Role::User, &[Phase::ProofSent], true)?;
    run(ctx, |ctx| {
        user_check_msg7(ctx, msg7, now, false, "user_accept_round")?;
        ctx.s.round += 1;
        ctx.phase = Phase::Authenticated;
        Ok(())
    })
}

fn i_us(sk: &SessionKey, pi_s: &[u8; 32], pi_d: &[u8; 32], uid: &[u8; 16]) -> [u8; 32] {
    digest(&[b"zaps/i-us", &sk.key, sk.tag.as_bytes(), pi_s, pi_d, uid])
}

/// Final round: checks Msg7 and acknowledges with
/// Msg8 = UID, Auth_us, I_us.
pub fn user_confirm(ctx: &mut SessionContext, msg7: &Msg7, now: Timestamp) -> Result<Msg8, ProtocolError> {
    ctx.guard("user_confirm", Role::User, &[Phase::ProofSent], true)?;
    run(ctx, |ctx| {
        user_check_msg7(ctx, msg7, now, true, "user_confirm")?;
        let sk = ctx.sk()?;
        let uid = ctx.s.uid.ok_or(ProtocolError::AuthFailure)?;
        let i_us = i_us(&sk, &ctx.s.pi_s.unwrap(), &ctx.s.pi_d.unwrap(), &uid);
        let key = leg_key(&sk, &ctx.k_master()?);
        let auth = AuthToken {
            mac: mac(b"zaps/mac-8", &key, &[&uid, &i_us], now),
            kc: key_confirm(b"zaps/kc-8", &sk.key, &[&i_us, &now.to_be_bytes()]),
        };
        ctx.s.round += 1;
        ctx.phase = Phase::Confirmed;
        Ok(Msg8 { uid, auth, i_us })
    })
}

fn rounds_done(ctx: &SessionContext, op: &'static str) -> Result<(), ProtocolError> {
    let (m, _) = mission(ctx)?;
    if ctx.s.round != m.rounds {
        return Err(ProtocolError::ProtocolViolation {
            op,
            role: ctx.role,
            phase: ctx.phase,
        });
    }
    Ok(())
}

pub fn server_confirm(ctx: &mut SessionContext, msg8: &Msg8, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("server_confirm", Role::Server, &[Phase::ProofSent], true)?;
    run(ctx, |ctx| {
        rounds_done(ctx, "server_confirm")?;
        let sk = ctx.sk()?;
        let (ul, _) = ctx.s.legs.clone().ok_or(ProtocolError::AuthFailure)?;
        if Some(msg8.uid) != ctx.s.uid {
            return Err(ProtocolError::AuthFailure);
        }
        let key = leg_key(&sk, &ul.k_master);
        timed_mac(ctx, now, |t| {
            mac(b"zaps/mac-8", &key, &[&msg8.uid, &msg8.i_us], t) == msg8.auth.mac
                && key_confirm(b"zaps/kc-8", &sk.key, &[&msg8.i_us, &t.to_be_bytes()]) == msg8.auth.kc
        })?;
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::Confirmed;
        Ok(())
    })
}

/// The drone sees Msg8, recomputes `I_us` from both proof digests and
/// checks the key-confirmation digest.
pub fn drone_observe_confirm(ctx: &mut SessionContext, msg8: &Msg8, now: Timestamp) -> Result<(), ProtocolError> {
    ctx.guard("drone_observe_confirm", Role::Drone, &[Phase::ProofSent], true)?;
    run(ctx, |ctx| {
        rounds_done(ctx, "drone_observe_confirm")?;
        let sk = ctx.sk()?;
        let (pi_s, pi_d) = (ctx.s.pi_s.unwrap(), ctx.s.pi_d.unwrap());
        if i_us(&sk, &pi_s, &pi_d, &msg8.uid) != msg8.i_us {
            return Err(ProtocolError::AuthFailure);
        }
        timed_mac(ctx, now, |t| {
            key_confirm(b"zaps/kc-8", &sk.key, &[&msg8.i_us, &t.to_be_bytes()]) == msg8.auth.kc
        })?;
        ctx.s.t_last = Some(now);
        ctx.phase = Phase::Confirmed;
        Ok(())
    })
}
