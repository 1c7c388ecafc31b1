//! Analytics for the metadata attacks: rank AUC, standardisation, logistic
//! regression, k-means and purity.

use rand::seq::SliceRandom;
use rand::Rng;

use super::PrivacyError;
use crate::rng::SimRng;

/// Area under the ROC curve as the Mann-Whitney statistic
/// `U / (n_pos * n_neg)`, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, PrivacyError> {
    if scores.len() != labels.len() {
        return Err(PrivacyError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PrivacyError::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(PrivacyError::NonFinite);
    }
    // Midranks over the sorted scores.
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Column means and standard deviations. Constant columns get unit scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        Scaler { mean, scale }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect())
            .collect()
    }
}

pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    Scaler::fit(rows).transform(rows)
}

pub const EPOCHS: usize = 500;
pub const LEARNING_RATE: f64 = 0.1;
pub const FOLDS: usize = 5;

/// Logistic model trained by full-batch gradient descent on the mean
/// log-loss, starting from zero weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Logistic {
    pub fn fit(x: &[Vec<f64>], y: &[bool], epochs: usize, lr: f64) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut grad = vec![0.0; d];
        for _ in 0..epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (xi, &yi) in x.iter().zip(y) {
                let z = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let err = sigmoid(z) - if yi { 1.0 } else { 0.0 };
                for (g, v) in grad.iter_mut().zip(xi) {
                    *g += err * v;
                }
                gb += err;
            }
            for (wj, g) in w.iter_mut().zip(&grad) {
                *wj -= lr * g / n;
            }
            b -= lr * gb / n;
        }
        Logistic { weights: w, bias: b }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + x.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>()
    }
}

/// Fold index per sample, stratified by label and shuffled with `rng`.
pub fn stratified_folds(labels: &[bool], k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    fold
}

/// Mean out-of-fold AUC of the logistic model. Each training fold is
/// standardised on its own statistics.
pub fn cross_validated_auc(x: &[Vec<f64>], y: &[bool], k: usize, rng: &mut SimRng) -> Result<f64, PrivacyError> {
    let pos = y.iter().filter(|v| **v).count();
    if pos < k || y.len() - pos < k {
        return Err(PrivacyError::TooFewSamples { needed: 2 * k, got: y.len() });
    }
    let fold = stratified_folds(y, k, rng);
    let mut aucs = Vec::with_capacity(k);
    for f in 0..k {
        let (mut xt, mut yt, mut xv, mut yv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] == f {
                xv.push(x[i].clone());
                yv.push(y[i]);
            } else {
                xt.push(x[i].clone());
                yt.push(y[i]);
            }
        }
        let scaler = Scaler::fit(&xt);
        let model = Logistic::fit(&scaler.transform(&xt), &yt, EPOCHS, LEARNING_RATE);
        let scores: Vec<f64> = scaler.transform(&xv).iter().map(|r| model.score(r)).collect();
        aucs.push(auc(&scores, &yv)?);
    }
    Ok(crate::stats::mean(&aucs))
}

pub const KMEANS_ITERATIONS: usize = 100;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding and a fixed iteration count.
/// An emptied cluster keeps its previous centroid.
pub fn kmeans(x: &[Vec<f64>], k: usize, iterations: usize, rng: &mut SimRng) -> Result<Vec<usize>, PrivacyError> {
    if k == 0 || k > x.len() {
        return Err(PrivacyError::TooManyClusters { k, n: x.len() });
    }
    let mut centroids: Vec<Vec<f64>> = vec![x[rng.gen_range(0..x.len())].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..x.len())
        } else {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = x.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if t < *d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        };
        centroids.push(x[next].clone());
        for (d, p) in d2.iter_mut().zip(x) {
            *d = d.min(dist2(p, &centroids[centroids.len() - 1]));
        }
    }
    let mut assign = vec![0usize; x.len()];
    for _ in 0..iterations {
        for (a, p) in assign.iter_mut().zip(x) {
            *a = (0..k)
                .min_by(|&i, &j| dist2(p, &centroids[i]).total_cmp(&dist2(p, &centroids[j])))
                .unwrap_or(0);
        }
        let d = x[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (a, p) in assign.iter().zip(x) {
            counts[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(assign)
}

/// `(1/N) * sum over clusters of the majority-label count`.
pub fn purity(assign: &[usize], labels: &[usize]) -> f64 {
    let mut counts: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for (a, l) in assign.iter().zip(labels) {
        *counts.entry((*a, *l)).or_default() += 1;
    }
    let mut best: std::collections::BTreeMap<usize, usize> = Default::default();
    for ((a, _), c) in counts {
        let e = best.entry(a).or_default();
        *e = (*e).max(c);
    }
    best.values().sum::<usize>() as f64 / assign.len().max(1) as f64
}

pub const SHUFFLES: usize = 100;

/// Mean purity of the same clustering against shuffled labels.
pub fn chance_purity(assign: &[usize], labels: &[usize], shuffles: usize, rng: &mut SimRng) -> f64 {
    let mut l = labels.to_vec();
    let mut acc = 0.0;
    for _ in 0..shuffles {
        l.shuffle(rng);
        acc += purity(assign, &l);
    }
    acc / shuffles.max(1) as f64
}

pub fn adjusted_purity(purity: f64, chance: f64) -> f64 {
    if chance >= 1.0 {
        0.0
    } else {
        (purity - chance) / (1.0 - chance)
    }
}

/// Shannon entropy of the byte distribution, bits per byte.
pub fn byte_entropy(bytes: &[u8]) -> f64 {
    let mut counts = [0usize; 256];
    for b in bytes {
        counts[*b as usize] += 1;
    }
    let n = bytes.len() as f64;
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Counts of the high nibble of every byte.
pub fn nibble_histogram(bytes: &[u8]) -> [f64; 16] {
    let mut h = [0.0; 16];
    for b in bytes {
        h[(b >> 4) as usize] += 1.0;
    }
    h
}
