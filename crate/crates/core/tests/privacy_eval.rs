use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use zaps_core::privacy::ml::{adjusted_purity, auc, kmeans, purity};
use zaps_core::privacy::*;
use zaps_core::rng::sub_rng;
use zaps_core::snark::ROUTE_LENGTHS;
use zaps_core::wire::{MsgKind, INIT_TOTAL};

/// Counts (positive, negative) pairs by direct enumeration.
fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

#[test]
fn auc_hand_cases() {
    let four = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    assert!((four - 0.75).abs() < 1e-12);
    assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap(), 0.0);
    assert_eq!(auc(&[0.3; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
}

#[test]
fn auc_errors() {
    assert_eq!(auc(&[0.1, 0.2], &[true, true]), Err(PrivacyError::SingleClass));
    assert_eq!(auc(&[0.1], &[true, false]), Err(PrivacyError::LengthMismatch(1, 2)));
    assert_eq!(auc(&[f64::NAN, 0.2], &[true, false]), Err(PrivacyError::NonFinite));
}

#[test]
fn random_scores_give_chance_auc() {
    let mut rng = sub_rng(1, "random-scores");
    let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..10_000).map(|_| rng.gen()).collect();
    let a = auc(&scores, &labels).unwrap();
    assert!((a - 0.5).abs() <= 0.03, "{a}");
}

proptest! {
    #[test]
    fn auc_matches_pair_enumeration(
        data in prop::collection::vec((0u8..20, any::<bool>()), 2..60)
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((a - auc_by_pairs(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_rank_invariant(
        data in prop::collection::vec((-1e3f64..1e3, any::<bool>()), 2..80),
        scale in 0.01f64..100.0,
        shift in -50f64..50.0,
        which in 0usize..3,
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        let f = |x: f64| match which {
            0 => scale * x + shift,
            1 => (x / 1e3).exp() * scale,
            _ => x.powi(3) + shift,
        };
        let mapped: Vec<f64> = scores.iter().map(|x| f(*x)).collect();
        prop_assert_eq!(auc(&mapped, &labels).unwrap(), auc(&scores, &labels).unwrap());
    }

    #[test]
    fn purity_bounds(assign in prop::collection::vec(0usize..5, 1..60), seed in any::<u64>()) {
        let mut labels = assign.clone();
        labels.shuffle(&mut sub_rng(seed, "labels"));
        let p = purity(&assign, &labels);
        let k = assign.iter().collect::<std::collections::BTreeSet<_>>().len();
        prop_assert!(p <= 1.0 + 1e-12);
        prop_assert!(p >= 1.0 / k as f64 - 1e-12);
        prop_assert_eq!(purity(&assign, &assign), 1.0);
    }
}

#[test]
fn purity_hand_case() {
    // Clusters {a,a,b} and {b,b,c}: majorities 2 and 2 of 6.
    let assign = [0, 0, 0, 1, 1, 1];
    let labels = [0, 0, 1, 1, 1, 2];
    assert!((purity(&assign, &labels) - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(adjusted_purity(1.0, 0.5), 1.0);
    assert_eq!(adjusted_purity(0.5, 0.5), 0.0);
}

#[test]
fn kmeans_separates_obvious_blobs() {
    let mut rng = sub_rng(2, "blobs");
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..30 {
            x.push(vec![c as f64 * 10.0 + rng.gen::<f64>(), rng.gen::<f64>()]);
            labels.push(c);
        }
    }
    let assign = kmeans(&x, 3, 100, &mut sub_rng(2, "km")).unwrap();
    assert_eq!(purity(&assign, &labels), 1.0);
    assert!(kmeans(&x, 91, 100, &mut sub_rng(2, "km")).is_err());
}

#[test]
fn trace_generation_is_deterministic_and_shaped() {
    let a = gen_traces(TraceMode::Protected, 4, 3, 9).unwrap();
    let b = gen_traces(TraceMode::Protected, 4, 3, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 12);
    assert_ne!(a, gen_traces(TraceMode::Protected, 4, 3, 10).unwrap());
    for t in &a {
        assert!(ROUTE_LENGTHS.contains(&t.route_len));
        let init: Vec<usize> = t.messages[..4].iter().map(|m| m.size).collect();
        assert_eq!(init.iter().sum::<usize>(), INIT_TOTAL);
        for m in &t.messages {
            assert_eq!(m.size, m.kind.size());
        }
        assert_eq!(t.proofs.len(), 3 * t.route_len);
        assert!(t.proofs.iter().all(|p| p.len() == 128));
        assert!(t.messages.windows(2).all(|w| w[1].time_ms >= w[0].time_ms));
        assert_eq!(features(t).len(), TRACE_FEATURES);
        assert!(features(t).iter().all(|v| v.is_finite()));
    }
    let tokens: std::collections::BTreeSet<_> = a.iter().map(|t| t.token).collect();
    assert_eq!(tokens.len(), a.len());
}

#[test]
fn baseline_leaks_route_size_and_stable_token() {
    let (p, b) = gen_trace_pair(4, 3, 11, &TraceConfig::default()).unwrap();
    let mut tokens: BTreeMap<usize, [u8; 32]> = BTreeMap::new();
    for (pt, bt) in p.iter().zip(&b) {
        assert_eq!(bt.mode, TraceMode::Baseline);
        assert_eq!(*tokens.entry(bt.uav).or_insert(bt.token), bt.token);
        assert!(bt.proofs.iter().all(|x| x.len() == baseline_proof_len(bt.route_len)));
        for (pm, bm) in pt.messages.iter().zip(&bt.messages) {
            let expect = match bm.kind {
                MsgKind::Msg5 | MsgKind::Msg6 | MsgKind::Msg7 => pm.size - 128 + baseline_proof_len(bt.route_len),
                _ => pm.size,
            };
            assert_eq!(bm.size, expect);
            assert_eq!(bm.time_ms, pm.time_ms);
        }
    }
    assert_eq!(tokens.len(), 4);
}

#[test]
fn generator_and_attack_errors() {
    assert_eq!(gen_traces(TraceMode::Protected, 1, 3, 0), Err(PrivacyError::Counts { uavs: 1, sessions: 3 }));
    assert_eq!(gen_traces(TraceMode::Protected, 3, 1, 0), Err(PrivacyError::Counts { uavs: 3, sessions: 1 }));
    let t = gen_traces(TraceMode::Protected, 2, 2, 0).unwrap();
    assert_eq!(cluster_attack(&t, 5, 0).unwrap_err(), PrivacyError::TooManyClusters { k: 5, n: 4 });
    let singles: Vec<_> = t.iter().filter(|x| x.session == 0).cloned().collect();
    assert_eq!(linkability_attack(&singles, 10, 0).unwrap_err(), PrivacyError::InsufficientSessions);
    let one_class: Vec<_> = proof_samples(&t).into_iter().map(|s| ProofSample { class: 5, ..s }).collect();
    assert_eq!(proof_distinguishability(&one_class, 0).unwrap_err(), PrivacyError::SingleClass);
}

#[test]
fn shuffled_label_controls_sit_at_chance() {
    let params = EvalParams::default();
    let mut purities = Vec::new();
    let mut proof_aucs = Vec::new();
    for seed in 0..5u64 {
        let (_, b) = gen_trace_pair(params.uavs, params.sessions_per_uav, seed, &params.traces).unwrap();
        let shuffled = shuffle_labels(&b, seed);
        purities.push(cluster_attack(&shuffled, params.uavs, seed).unwrap().value);
        let mut samples = proof_samples(&b);
        let mut classes: Vec<usize> = samples.iter().map(|s| s.class).collect();
        classes.shuffle(&mut sub_rng(seed, "proof-classes"));
        for (s, c) in samples.iter_mut().zip(classes) {
            s.class = c;
        }
        proof_aucs.push(proof_distinguishability(&samples, seed).unwrap().value);
    }
    let mp = purities.iter().sum::<f64>() / purities.len() as f64;
    let ma = proof_aucs.iter().sum::<f64>() / proof_aucs.len() as f64;
    assert!(mp.abs() <= 0.05, "{purities:?}");
    assert!((ma - 0.5).abs() <= 0.03, "{proof_aucs:?}");
}

#[test]
fn protected_never_exceeds_baseline() {
    let params = EvalParams::default();
    let seeds: Vec<u64> = (0..3).collect();
    let (p, b) = evaluate_seeds(&params, &seeds).unwrap();
    assert_eq!(p.reports.len(), 3 * seeds.len());
    for (rp, rb) in p.reports.iter().zip(&b.reports) {
        assert_eq!((rp.attack, rp.seed), (rb.attack, rb.seed));
        assert_eq!(rp.mode, Some(TraceMode::Protected));
        assert_eq!(rb.mode, Some(TraceMode::Baseline));
        assert!(rp.value <= rb.value, "{:?} seed {}: {} > {}", rp.attack, rp.seed, rp.value, rb.value);
        assert!((0.0..=1.0).contains(&rb.value));
    }
    let again = evaluate_seeds(&params, &seeds).unwrap();
    assert_eq!(again.0, p);
    assert_eq!(again.1, b);
}

#[test]
fn report_csv_shape() {
    let t = gen_traces(TraceMode::Baseline, 4, 3, 5).unwrap();
    let r = cluster_attack(&t, 4, 5).unwrap();
    assert_eq!(AttackReport::csv_header(), "attack,mode,metric,value,raw,chance,seed");
    let row = r.csv_row();
    assert_eq!(row.split(',').count(), 7);
    assert!(row.starts_with("clustering,baseline,adjusted-purity,"));
}
