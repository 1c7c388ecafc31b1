//! Session clustering, linkability and proof-distinguishability attacks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ml::{
    adjusted_purity, byte_entropy, chance_purity, cross_validated_auc, kmeans, nibble_histogram, purity, standardize,
    FOLDS, KMEANS_ITERATIONS, SHUFFLES,
};
use super::{features, gen_trace_pair, PrivacyError, SessionTrace, TraceConfig, TraceMode};
use crate::rng::sub_rng;
use crate::stats::mean;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Clustering,
    Linkability,
    Proofdist,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::Clustering => "clustering",
            AttackKind::Linkability => "linkability",
            AttackKind::Proofdist => "proofdist",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Purity,
    AdjustedPurity,
    Auc,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Purity => "purity",
            Metric::AdjustedPurity => "adjusted-purity",
            Metric::Auc => "auc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub mode: Option<TraceMode>,
    pub metric: Metric,
    pub value: f64,
    /// Raw purity, for the clustering attack.
    pub raw: Option<f64>,
    /// Shuffled-label purity, for the clustering attack.
    pub chance: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl AttackReport {
    pub fn csv_header() -> &'static str {
        "attack,mode,metric,value,raw,chance,seed"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6},{},{},{}",
            self.attack.label(),
            self.mode.map(TraceMode::label).unwrap_or(""),
            self.metric.label(),
            self.value,
            opt(self.raw),
            opt(self.chance),
            self.seed
        )
    }
}

fn mode_of(traces: &[SessionTrace]) -> Option<TraceMode> {
    let first = traces.first()?.mode;
    traces.iter().all(|t| t.mode == first).then_some(first)
}

/// Copies of `traces` with the UAV labels permuted.
pub fn shuffle_labels(traces: &[SessionTrace], seed: u64) -> Vec<SessionTrace> {
    let mut labels: Vec<usize> = traces.iter().map(|t| t.uav).collect();
    labels.shuffle(&mut sub_rng(seed, "privacy/shuffle-labels"));
    traces
        .iter()
        .zip(labels)
        .map(|(t, uav)| SessionTrace { uav, ..t.clone() })
        .collect()
}

/// k-means over standardized trace features, scored against the UAV labels.
pub fn cluster_attack(traces: &[SessionTrace], k: usize, seed: u64) -> Result<AttackReport, PrivacyError> {
    if k == 0 || k > traces.len() {
        return Err(PrivacyError::TooManyClusters { k, n: traces.len() });
    }
    let x = standardize(&traces.iter().map(features).collect::<Vec<_>>());
    let labels: Vec<usize> = traces.iter().map(|t| t.uav).collect();
    let assign = kmeans(&x, k, KMEANS_ITERATIONS, &mut sub_rng(seed, "privacy/kmeans"))?;
    let raw = purity(&assign, &labels);
    let chance = chance_purity(&assign, &labels, SHUFFLES, &mut sub_rng(seed, "privacy/chance"));
    Ok(AttackReport {
        attack: AttackKind::Clustering,
        mode: mode_of(traces),
        metric: Metric::AdjustedPurity,
        value: adjusted_purity(raw, chance),
        raw: Some(raw),
        chance: Some(chance),
        params: BTreeMap::from([("k".into(), k as f64), ("n".into(), traces.len() as f64)]),
        seed,
    })
}

/// Same-UAV and different-UAV pairs, `pairs_per_class` of each (fewer if
/// the traces do not hold that many same-UAV pairs).
fn sample_pairs(
    traces: &[SessionTrace],
    pairs_per_class: usize,
    rng: &mut crate::rng::SimRng,
) -> Result<Vec<(usize, usize, bool)>, PrivacyError> {
    let mut same = Vec::new();
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            if traces[i].uav == traces[j].uav {
                same.push((i, j));
            }
        }
    }
    if same.is_empty() {
        return Err(PrivacyError::InsufficientSessions);
    }
    let uavs: BTreeSet<usize> = traces.iter().map(|t| t.uav).collect();
    if uavs.len() < 2 {
        return Err(PrivacyError::SingleClass);
    }
    same.shuffle(rng);
    same.truncate(pairs_per_class);
    let want = same.len();
    let mut diff = BTreeSet::new();
    while diff.len() < want {
        let i = rng.gen_range(0..traces.len());
        let j = rng.gen_range(0..traces.len());
        if traces[i].uav != traces[j].uav {
            diff.insert((i.min(j), i.max(j)));
        }
    }
    let mut pairs: Vec<(usize, usize, bool)> = same.into_iter().map(|(i, j)| (i, j, true)).collect();
    pairs.extend(diff.into_iter().map(|(i, j)| (i, j, false)));
    Ok(pairs)
}

/// Pairwise same-UAV classifier on absolute feature differences.
pub fn linkability_attack(traces: &[SessionTrace], pairs_per_class: usize, seed: u64) -> Result<AttackReport, PrivacyError> {
    let mut rng = sub_rng(seed, "privacy/pairs");
    let pairs = sample_pairs(traces, pairs_per_class, &mut rng)?;
    let f: Vec<Vec<f64>> = traces.iter().map(features).collect();
    let x: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j, _)| f[i].iter().zip(&f[j]).map(|(a, b)| (a - b).abs()).collect())
        .collect();
    let y: Vec<bool> = pairs.iter().map(|p| p.2).collect();
    let auc = cross_validated_auc(&x, &y, FOLDS, &mut sub_rng(seed, "privacy/folds"))?;
    Ok(AttackReport {
        attack: AttackKind::Linkability,
        mode: mode_of(traces),
        metric: Metric::Auc,
        value: auc,
        raw: None,
        chance: None,
        params: BTreeMap::from([("pairs_per_class".into(), (pairs.len() / 2) as f64)]),
        seed,
    })
}

/// One proof with the route-length class of its session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofSample {
    pub class: usize,
    pub bytes: Vec<u8>,
}

pub fn proof_samples(traces: &[SessionTrace]) -> Vec<ProofSample> {
    traces
        .iter()
        .flat_map(|t| t.proofs.iter().map(|p| ProofSample { class: t.route_len, bytes: p.clone() }))
        .collect()
}

/// 16-bin high-nibble histogram plus byte entropy.
pub fn proof_features(bytes: &[u8]) -> Vec<f64> {
    let mut f = nibble_histogram(bytes).to_vec();
    f.push(byte_entropy(bytes));
    f
}

/// Route-class classifier over proof bytes; one-vs-rest AUC averaged over
/// classes when there are more than two.
pub fn proof_distinguishability(samples: &[ProofSample], seed: u64) -> Result<AttackReport, PrivacyError> {
    let classes: Vec<usize> = samples.iter().map(|s| s.class).collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(PrivacyError::SingleClass);
    }
    let x: Vec<Vec<f64>> = samples.iter().map(|s| proof_features(&s.bytes)).collect();
    let targets = if classes.len() == 2 { &classes[1..] } else { &classes[..] };
    let aucs = targets
        .iter()
        .map(|&c| {
            let y: Vec<bool> = samples.iter().map(|s| s.class == c).collect();
            cross_validated_auc(&x, &y, FOLDS, &mut sub_rng(seed, &format!("privacy/proof-folds/{c}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AttackReport {
        attack: AttackKind::Proofdist,
        mode: None,
        metric: Metric::Auc,
        value: mean(&aucs),
        raw: None,
        chance: None,
        params: BTreeMap::from([
            ("samples".into(), samples.len() as f64),
            ("classes".into(), classes.len() as f64),
        ]),
        seed,
    })
}

/// Population and attack sizes for one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub uavs: usize,
    pub sessions_per_uav: usize,
    pub pairs_per_class: usize,
    pub traces: TraceConfig,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            uavs: 20,
            sessions_per_uav: 5,
            pairs_per_class: 200,
            traces: TraceConfig::default(),
        }
    }
}

/// All three attacks on one set of traces.
pub fn evaluate(traces: &[SessionTrace], params: &EvalParams, seed: u64) -> Result<Vec<AttackReport>, PrivacyError> {
    let k = traces.iter().map(|t| t.uav).collect::<BTreeSet<_>>().len();
    let mut proof = proof_distinguishability(&proof_samples(traces), seed)?;
    proof.mode = mode_of(traces);
    Ok(vec![
        cluster_attack(traces, k, seed)?,
        linkability_attack(traces, params.pairs_per_class, seed)?,
        proof,
    ])
}

/// Seed-averaged metrics for one mode, one value per attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacySummary {
    pub mode: TraceMode,
    pub seeds: Vec<u64>,
    pub clustering_adjusted_purity: f64,
    pub clustering_purity: f64,
    pub linkability_auc: f64,
    pub proofdist_auc: f64,
    pub reports: Vec<AttackReport>,
}

impl PrivacySummary {
    fn from_reports(mode: TraceMode, seeds: &[u64], reports: Vec<AttackReport>) -> Self {
        let pick = |a: AttackKind, raw: bool| {
            let v: Vec<f64> = reports
                .iter()
                .filter(|r| r.attack == a)
                .map(|r| if raw { r.raw.unwrap_or(r.value) } else { r.value })
                .collect();
            mean(&v)
        };
        PrivacySummary {
            mode,
            seeds: seeds.to_vec(),
            clustering_adjusted_purity: pick(AttackKind::Clustering, false),
            clustering_purity: pick(AttackKind::Clustering, true),
            linkability_auc: pick(AttackKind::Linkability, false),
            proofdist_auc: pick(AttackKind::Proofdist, false),
            reports,
        }
    }

    pub fn metric(&self, attack: AttackKind) -> f64 {
        match attack {
            AttackKind::Clustering => self.clustering_adjusted_purity,
            AttackKind::Linkability => self.linkability_auc,
            AttackKind::Proofdist => self.proofdist_auc,
        }
    }
}

/// Runs the sessions for every seed once and evaluates both views.
/// Returns the protected summary, then the baseline one.
pub fn evaluate_seeds(params: &EvalParams, seeds: &[u64]) -> Result<(PrivacySummary, PrivacySummary), PrivacyError> {
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let (p, b) = gen_trace_pair(params.uavs, params.sessions_per_uav, seed, &params.traces)?;
            Ok((evaluate(&p, params, seed)?, evaluate(&b, params, seed)?))
        })
        .collect::<Result<Vec<_>, PrivacyError>>()?;
    let (p, b): (Vec<_>, Vec<_>) = per_seed.into_iter().unzip();
    Ok((
        PrivacySummary::from_reports(TraceMode::Protected, seeds, p.concat()),
        PrivacySummary::from_reports(TraceMode::Baseline, seeds, b.concat()),
    ))
}
