use std::sync::OnceLock;

use proptest::prelude::*;
use zaps_core::protocol::*;
use zaps_core::rng::sub_rng;
use zaps_core::snark::Backend;
use zaps_core::wire::*;

fn transcript(backend: Backend, per_waypoint: bool, seed: u64) -> Transcript {
    let auth = Authority::standard(seed, backend);
    let (u, d) = enroll_pair(&auth, seed, 0).unwrap();
    let route = random_route(&mut sub_rng(seed, "route"), &standard_fence(), 5);
    let mut run = honest_run(&auth, u, d, &route, per_waypoint, sub_rng(seed, "run"));
    let t = run_honest_session(&mut run, 0, 20_000);
    assert!(run.outcome().is_confirmed(), "{:?}", run.outcome());
    t
}

fn honest_messages() -> &'static Vec<(MsgKind, Vec<u8>)> {
    static CELL: OnceLock<Vec<(MsgKind, Vec<u8>)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [Backend::Schnorr, Backend::Qap]
            .into_iter()
            .flat_map(|b| transcript(b, false, 3).entries)
            .map(|(_, e)| (e.kind, e.bytes))
            .collect()
    })
}

#[test]
fn honest_sizes_match_layout() {
    let sizes: Vec<usize> = MsgKind::ALL.iter().map(|k| k.size()).collect();
    assert_eq!(sizes, [80, 144, 128, 128, 276, 256, 272, 112]);
    for (kind, bytes) in honest_messages() {
        assert_eq!(bytes.len(), kind.size(), "{kind}");
    }
    let init: usize = MsgKind::ALL[..4].iter().map(|k| k.size()).sum();
    let proof: usize = MsgKind::ALL[4..].iter().map(|k| k.size()).sum();
    assert_eq!((init, proof, init + proof), (INIT_TOTAL, PROOF_TOTAL, SESSION_TOTAL));
    assert_eq!((INIT_TOTAL, PROOF_TOTAL, SESSION_TOTAL), (480, 916, 1396));
}

#[test]
fn honest_messages_round_trip() {
    for (kind, bytes) in honest_messages() {
        let msg = decode(bytes, *kind).unwrap();
        assert_eq!(msg.kind(), *kind);
        assert_eq!(&encode(&msg), bytes);
        let framed = encode_framed(&msg);
        assert_eq!(framed.len(), bytes.len() + 3);
        assert_eq!(decode_framed(&framed).unwrap(), msg);
    }
}

#[test]
fn truncated_msg6_is_malformed() {
    let (_, m6) = honest_messages().iter().find(|(k, _)| *k == MsgKind::Msg6).unwrap();
    for cut in [1, 32, m6.len() - 1] {
        let err = decode(&m6[..m6.len() - cut], MsgKind::Msg6).unwrap_err();
        assert_eq!(
            err,
            WireError::Length {
                kind: MsgKind::Msg6,
                expected: 256,
                got: 256 - cut
            }
        );
    }
}

#[test]
fn extended_msg8_is_malformed() {
    let (_, m8) = honest_messages().iter().find(|(k, _)| *k == MsgKind::Msg8).unwrap();
    let mut long = m8.clone();
    long.push(0);
    assert!(matches!(
        decode(&long, MsgKind::Msg8),
        Err(WireError::Length { expected: 112, got: 113, .. })
    ));
}

#[test]
fn every_kind_rejects_wrong_length() {
    for kind in MsgKind::ALL {
        for len in [0, kind.size() - 1, kind.size() + 1] {
            assert!(decode(&vec![0u8; len], kind).is_err(), "{kind} {len}");
        }
    }
}

#[test]
fn nonzero_proof_padding_is_malformed() {
    let schnorr: Vec<_> = transcript(Backend::Schnorr, false, 5).entries;
    for (_, env) in schnorr {
        let Some(off) = env.kind.proof_offset() else { continue };
        let mut b = env.bytes.clone();
        b[off + 127] ^= 1;
        // Neither backend layout accepts a Schnorr envelope with a dirty tail.
        assert_eq!(decode(&b, env.kind), Err(WireError::Padding { kind: env.kind }));
    }
}

#[test]
fn framing_errors() {
    let (_, m1) = &honest_messages()[0];
    let msg = decode(m1, MsgKind::Msg1).unwrap();
    let mut f = encode_framed(&msg);
    f[0] = 9;
    assert_eq!(decode_framed(&f), Err(WireError::UnknownTag(9)));
    f[0] = 0;
    assert_eq!(decode_framed(&f), Err(WireError::UnknownTag(0)));
    let mut f = encode_framed(&msg);
    f.pop();
    assert!(matches!(decode_framed(&f), Err(WireError::FrameLength { declared: 80, actual: 79 })));
    assert!(decode_framed(&[1]).is_err());
    for k in MsgKind::ALL {
        assert_eq!(MsgKind::from_tag(k.tag()).unwrap(), k);
    }
}

#[test]
fn overhead_init_only() {
    let trace: Vec<_> = MsgKind::ALL[..4].iter().map(|k| (*k, k.size())).collect();
    let r = overhead_report(&trace);
    assert_eq!((r.init_bytes, r.proof_bytes, r.total_bytes), (480, 0, 480));
    assert!(!r.complete);
}

#[test]
fn overhead_of_honest_session() {
    for backend in [Backend::Schnorr, Backend::Qap] {
        let t = transcript(backend, false, 7);
        let r = overhead_report(&t.sizes());
        assert_eq!((r.init_bytes, r.proof_bytes, r.total_bytes), (480, 916, 1396));
        assert_eq!(t.total_bytes(), 1396);
        assert!(r.complete);
        assert_eq!(r.extra_bytes, 0);
    }
}

#[test]
fn overhead_per_waypoint_itemises_extra_rounds() {
    let t = transcript(Backend::Schnorr, true, 11);
    let r = overhead_report(&t.sizes());
    let rounds = t.entries.iter().filter(|(_, e)| e.kind == MsgKind::Msg5).count();
    assert_eq!(rounds, 5);
    let round_bytes = MsgKind::Msg5.size() + MsgKind::Msg6.size() + MsgKind::Msg7.size();
    assert_eq!(r.extras.len(), 3 * (rounds - 1));
    assert_eq!(r.extra_bytes, (rounds - 1) * round_bytes);
    assert_eq!(r.total_bytes, SESSION_TOTAL + r.extra_bytes);
    assert_eq!(r.total_bytes, t.total_bytes());
    assert!(r.extras.iter().all(|e| e.round > 0));
}

#[test]
fn overhead_csv_has_subtotals() {
    let csv = overhead_report(&nominal_trace()).to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "message,round,phase,bytes");
    assert_eq!(lines.len(), 1 + 8 + 4);
    assert!(lines.contains(&"init_subtotal,,init,480"));
    assert!(lines.contains(&"proof_subtotal,,proof,916"));
    assert!(lines.contains(&"total,,,1396"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Fields outside the proof envelope are opaque bytes to the codec.
    #[test]
    fn arbitrary_fields_round_trip(idx in 0usize..16, noise in prop::collection::vec(any::<u8>(), 276)) {
        let msgs = honest_messages();
        let (kind, bytes) = &msgs[idx % msgs.len()];
        let mut b = bytes.clone();
        let proof = kind.proof_offset().map(|o| o..o + 128);
        for (i, v) in b.iter_mut().enumerate() {
            if proof.as_ref().is_none_or(|r| !r.contains(&i)) {
                *v = noise[i];
            }
        }
        let msg = decode(&b, *kind).unwrap();
        prop_assert_eq!(encode(&msg), b);
        prop_assert_eq!(decode_framed(&encode_framed(&msg)).unwrap(), msg);
    }

    #[test]
    fn accounting_identity(kinds in prop::collection::vec(0usize..8, 0..40)) {
        let trace: Vec<_> = kinds.iter().map(|i| (MsgKind::ALL[*i], MsgKind::ALL[*i].size())).collect();
        let r = overhead_report(&trace);
        let sum: usize = trace.iter().map(|(_, s)| s).sum();
        prop_assert_eq!(r.init_bytes + r.proof_bytes, r.total_bytes);
        prop_assert_eq!(r.total_bytes, sum);
        prop_assert_eq!(r.messages.len(), trace.len());
        prop_assert!(r.extra_bytes <= r.proof_bytes);
    }
}
