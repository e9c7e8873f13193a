//! Metric primitives: contrastive loss, retrieval precision, multimodal
//! distance, Fréchet distance between Gaussian feature fits, diversity,
//! per-description multimodality, corpus BLEU, and repetition statistics.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::diff::Real;
use crate::error::{Error, Result};
use crate::util::Rng;

pub fn euclidean(a: &[Real], b: &[Real]) -> Real {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<Real>().sqrt()
}

/// Contrastive objective on one feature pair: matched pairs are pulled by
/// the squared squared-distance, mismatched pairs pushed to a squared
/// distance of at least `margin` by a squared hinge.
pub fn contrastive_loss(s: &[Real], p: &[Real], matched: bool, margin: Real) -> Real {
    assert!(margin > 0.0, "contrastive margin must be positive");
    let d2: Real = s.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
    if matched {
        d2 * d2
    } else {
        let h = (margin - d2).max(0.0);
        h * h
    }
}

/// Top-k retrieval accuracy: each query is ranked against its true
/// counterpart plus `distractors` mismatched candidates drawn from the
/// other pairs. Returns accuracies for k = 1..=k_max.
pub fn r_precision(
    queries: &[Vec<Real>],
    counterparts: &[Vec<Real>],
    k_max: usize,
    distractors: usize,
    rng: &mut Rng,
) -> Result<Vec<Real>> {
    if queries.len() != counterparts.len() {
        return Err(Error::Data(format!(
            "r_precision: {} queries vs {} counterparts",
            queries.len(),
            counterparts.len()
        )));
    }
    if counterparts.len() < distractors + 1 {
        return Err(Error::Data(format!(
            "r_precision needs at least {} pairs for {distractors} distractors, got {}",
            distractors + 1,
            counterparts.len()
        )));
    }
    let n = queries.len();
    let mut hits = vec![0usize; k_max];
    for i in 0..n {
        // pool: the true counterpart + `distractors` others, no repeats
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.shuffle(rng);
        others.truncate(distractors);
        let true_dist = euclidean(&queries[i], &counterparts[i]);
        // rank of the true counterpart = 1 + number of strictly closer
        // distractors
        let closer = others
            .iter()
            .filter(|&&j| euclidean(&queries[i], &counterparts[j]) < true_dist)
            .count();
        for k in 0..k_max {
            if closer <= k {
                hits[k] += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as Real / n as Real).collect())
}

/// Mean Euclidean distance between matched feature pairs.
pub fn multimodal_distance(pairs: &[(Vec<Real>, Vec<Real>)]) -> Real {
    assert!(!pairs.is_empty(), "multimodal_distance: empty pair set");
    pairs.iter().map(|(a, b)| euclidean(a, b)).sum::<Real>() / pairs.len() as Real
}

/// Gaussian fit of a feature set.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl GaussianStats {
    /// Sample mean and covariance (unbiased). Fewer than dim+1 samples
    /// leave the covariance rank-deficient; eigenvalue clamping inside
    /// `fid` keeps the square root defined.
    pub fn from_features(features: &[Vec<Real>]) -> Result<GaussianStats> {
        if features.is_empty() {
            return Err(Error::Data("GaussianStats: empty feature set".into()));
        }
        let d = features[0].len();
        let n = features.len();
        let mut mean = vec![0.0f64; d];
        for f in features {
            if f.len() != d {
                return Err(Error::Data("GaussianStats: ragged feature set".into()));
            }
            for (m, &v) in mean.iter_mut().zip(f) {
                *m += v as f64;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for f in features {
            let c: Vec<f64> = f.iter().zip(&mean).map(|(&v, &m)| v as f64 - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += c[i] * c[j];
                }
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        cov /= denom;
        Ok(GaussianStats { mean, cov, count: n })
    }

    pub fn from_moments(mean: Vec<f64>, cov: DMatrix<f64>) -> GaussianStats {
        let d = mean.len();
        assert_eq!(cov.nrows(), d);
        assert_eq!(cov.ncols(), d);
        GaussianStats { mean, cov, count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }
}

/// Symmetric PSD square root via eigendecomposition; small negative
/// eigenvalues clamp to zero.
fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let d = m.nrows();
    let mut diag = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    &eig.eigenvectors * diag * eig.eigenvectors.transpose()
}

/// Fréchet distance between two Gaussian fits:
/// `||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`.
/// The inner product is symmetrized before each eigendecomposition, so
/// the square roots stay real; the result clamps at zero.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<Real> {
    if a.dim() != b.dim() {
        return Err(Error::Data(format!("fid: dims {} vs {}", a.dim(), b.dim())));
    }
    if !a.finite() || !b.finite() {
        return Err(Error::Numerical("fid: non-finite statistics".into()));
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let s1_half = sym_sqrt(&a.cov);
    let inner = &s1_half * &b.cov * &s1_half;
    let cross = sym_sqrt(&inner);
    let trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    Ok(((mean_term + trace_term) as Real).max(0.0))
}

/// Mean distance between two equally sized random subsets (sampled
/// without replacement within each subset).
pub fn diversity(features: &[Vec<Real>], subset: usize, rng: &mut Rng) -> Result<Real> {
    if features.len() < 2 {
        return Err(Error::Data(format!(
            "diversity needs at least 2 features, got {}",
            features.len()
        )));
    }
    let s = subset.min(features.len());
    let pick = |rng: &mut Rng| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..features.len()).collect();
        idx.shuffle(rng);
        idx.truncate(s);
        idx
    };
    let first = pick(rng);
    let second = pick(rng);
    let total: Real = first
        .iter()
        .zip(&second)
        .map(|(&i, &j)| euclidean(&features[i], &features[j]))
        .sum();
    Ok(total / s as Real)
}

/// Within-description spread: for each description's generation set, two
/// subsets of size `s_m` are paired elementwise; distances average over
/// descriptions and positions.
pub fn multimodality(per_text: &[Vec<Vec<Real>>], s_m: usize, rng: &mut Rng) -> Result<Real> {
    if per_text.is_empty() {
        return Err(Error::Data("multimodality: no descriptions".into()));
    }
    let offenders: Vec<usize> = per_text
        .iter()
        .enumerate()
        .filter(|(_, f)| f.len() < 2 * s_m)
        .map(|(i, _)| i)
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Data(format!(
            "multimodality needs {} generations per description; too few for descriptions {offenders:?}",
            2 * s_m
        )));
    }
    let mut total = 0.0;
    for feats in per_text {
        let mut idx: Vec<usize> = (0..feats.len()).collect();
        idx.shuffle(rng);
        let first = &idx[..s_m];
        let second = &idx[s_m..2 * s_m];
        for (&i, &j) in first.iter().zip(second) {
            total += euclidean(&feats[i], &feats[j]);
        }
    }
    Ok(total / (per_text.len() * s_m) as Real)
}

/// Corpus BLEU over orders 1..=n, as a percentage. Modified (clipped)
/// n-gram precision, geometric mean across orders, and a symmetric
/// brevity penalty `exp(-|1 - r/c|)` with `r` the closest reference
/// length total and `c` the candidate length total.
pub fn bleu<T: std::hash::Hash + Eq + Clone>(
    candidates: &[Vec<T>],
    references: &[Vec<Vec<T>>],
    n: usize,
) -> Result<Real> {
    if candidates.is_empty() {
        return Err(Error::Data("bleu: empty candidate set".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Data(format!(
            "bleu: {} candidates vs {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if !(1..=4).contains(&n) {
        return Err(Error::Data(format!("bleu order must be 1..=4, got {n}")));
    }
    if references.iter().any(|r| r.is_empty()) {
        return Err(Error::Data("bleu: every candidate needs at least one reference".into()));
    }

    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(references) {
        cand_len += cand.len();
        // closest reference length; ties take the shorter
        let closest = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| {
                let diff = (l as isize - cand.len() as isize).abs();
                (diff, l)
            })
            .unwrap();
        ref_len += closest;

        for order in 1..=n {
            if cand.len() < order {
                continue;
            }
            let mut cand_counts: HashMap<&[T], usize> = HashMap::new();
            for w in cand.windows(order) {
                *cand_counts.entry(w).or_insert(0) += 1;
            }
            let mut max_ref_counts: HashMap<&[T], usize> = HashMap::new();
            for r in refs {
                if r.len() < order {
                    continue;
                }
                let mut counts: HashMap<&[T], usize> = HashMap::new();
                for w in r.windows(order) {
                    *counts.entry(w).or_insert(0) += 1;
                }
                for (k, v) in counts {
                    let e = max_ref_counts.entry(k).or_insert(0);
                    *e = (*e).max(v);
                }
            }
            for (gram, count) in cand_counts {
                total[order - 1] += count;
                matched[order - 1] += count.min(*max_ref_counts.get(gram).unwrap_or(&0));
            }
        }
    }

    let mut log_sum = 0.0f64;
    for order in 0..n {
        if total[order] == 0 || matched[order] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[order] as f64 / total[order] as f64).ln();
    }
    let geo = (log_sum / n as f64).exp();
    let bp = if cand_len == 0 {
        0.0
    } else {
        (-(1.0 - ref_len as f64 / cand_len as f64).abs()).exp()
    };
    Ok((geo * bp * 100.0) as Real)
}

/// Mean and 95% confidence half-width (normal approximation) over
/// repetition values.
pub fn mean_ci95(values: &[Real]) -> (Real, Real) {
    assert!(!values.is_empty());
    let n = values.len() as Real;
    let mean = values.iter().sum::<Real>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}
