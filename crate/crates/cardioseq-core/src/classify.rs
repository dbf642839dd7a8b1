//! Cross-validated binary classification harness over feature tables.
//!
//! Three deterministic classifiers scored by AUC under stratified k-fold
//! cross-validation, with per-fold feature standardization fitted on the
//! training portion only. Hyperparameters are fixed: 100 decision stumps for
//! the boosting ensemble, Ledoit-Wolf shrinkage for the discriminant, and a
//! C = 1 linear support vector machine trained by dual coordinate descent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::rng::{derive_seed, Rng};
use crate::stats;

pub const ADABOOST_ROUNDS: usize = 100;
pub const SVM_C: f64 = 1.0;
pub const SVM_EPOCHS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    AdaBoost,
    Lda,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] =
        [ClassifierKind::AdaBoost, ClassifierKind::Lda, ClassifierKind::Svm];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::AdaBoost => "adaboost",
            ClassifierKind::Lda => "lda",
            ClassifierKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> CoreResult<Self> {
        match s {
            "adaboost" => Ok(ClassifierKind::AdaBoost),
            "lda" => Ok(ClassifierKind::Lda),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(CoreError::Input(format!("unknown classifier `{other}`"))),
        }
    }
}

/// Cross-validated performance of one classifier on one feature set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub fold_aucs: Vec<f64>,
}

/// Stratified fold assignment: within each class, a seeded shuffle dealt
/// round-robin, so every fold holds both classes when counts allow.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        Rng::from_seed(derive_seed(seed, class as u64)).shuffle(&mut idx);
        for (k, &i) in idx.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

/// Stratified k-fold cross-validated AUC.
pub fn cross_validated_auc(
    features: &[Vec<f64>],
    labels: &[bool],
    kind: ClassifierKind,
    folds: usize,
    seed: u64,
) -> CoreResult<CvResult> {
    if features.len() != labels.len() {
        return Err(CoreError::Shape(format!(
            "feature rows {} != labels {}",
            features.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos < folds || n_neg < folds {
        return Err(CoreError::Input(format!(
            "need at least {folds} samples per class for {folds}-fold stratification, \
             got {n_pos} positive / {n_neg} negative"
        )));
    }
    let assignment = stratified_folds(labels, folds, seed);
    let mut fold_aucs = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_idx: Vec<usize> =
            (0..labels.len()).filter(|&i| assignment[i] != fold).collect();
        let test_idx: Vec<usize> =
            (0..labels.len()).filter(|&i| assignment[i] == fold).collect();
        let standardizer = Standardizer::fit(features, &train_idx);
        let train_x: Vec<Vec<f64>> =
            train_idx.iter().map(|&i| standardizer.apply(&features[i])).collect();
        let train_y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
        let test_x: Vec<Vec<f64>> =
            test_idx.iter().map(|&i| standardizer.apply(&features[i])).collect();
        let test_y: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();

        let scores = match kind {
            ClassifierKind::AdaBoost => {
                let model = AdaBoostStumps::fit(&train_x, &train_y, ADABOOST_ROUNDS);
                test_x.iter().map(|x| model.score(x)).collect::<Vec<f64>>()
            }
            ClassifierKind::Lda => {
                let model = ShrinkageLda::fit(&train_x, &train_y)?;
                test_x.iter().map(|x| model.score(x)).collect()
            }
            ClassifierKind::Svm => {
                let model = LinearSvm::fit(&train_x, &train_y, derive_seed(seed, 100 + fold as u64));
                test_x.iter().map(|x| model.score(x)).collect()
            }
        };
        fold_aucs.push(stats::auc(&scores, &test_y)?);
    }
    let mean = fold_aucs.iter().sum::<f64>() / folds as f64;
    let var = fold_aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
        / (folds as f64 - 1.0).max(1.0);
    Ok(CvResult {
        mean_auc: mean,
        sd_auc: libm::sqrt(var),
        fold_aucs,
    })
}

/// Per-feature z-scoring fitted on the training rows of a fold.
struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    fn fit(features: &[Vec<f64>], rows: &[usize]) -> Standardizer {
        let p = features[0].len();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        for &i in rows {
            for (m, &v) in mean.iter_mut().zip(features[i].iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; p];
        for &i in rows {
            for ((s, &v), &m) in std.iter_mut().zip(features[i].iter()).zip(mean.iter()) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = libm::sqrt(*s / n).max(1e-12);
        }
        Standardizer { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter())
            .zip(self.std.iter())
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }
}

/// Discrete boosting over depth-1 threshold classifiers.
struct AdaBoostStumps {
    stumps: Vec<Stump>,
}

#[derive(Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    /// +1: predict positive above the threshold; -1: below.
    polarity: f64,
    alpha: f64,
}

impl Stump {
    fn predict(&self, x: &[f64]) -> f64 {
        let raw = if x[self.feature] > self.threshold { 1.0 } else { -1.0 };
        raw * self.polarity
    }
}

impl AdaBoostStumps {
    fn fit(features: &[Vec<f64>], labels: &[bool], rounds: usize) -> AdaBoostStumps {
        let n = features.len();
        let p = features[0].len();
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut stumps = Vec::with_capacity(rounds);

        // pre-sorted feature orders for threshold scans
        let mut orders: Vec<Vec<usize>> = Vec::with_capacity(p);
        for j in 0..p {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                features[a][j]
                    .partial_cmp(&features[b][j])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            orders.push(order);
        }

        for _ in 0..rounds {
            // find the weighted-error-minimizing (feature, threshold, polarity)
            let mut best = (f64::INFINITY, 0usize, f64::NEG_INFINITY, 1.0f64);
            for j in 0..p {
                let order = &orders[j];
                // error of "predict positive above threshold" starting below
                // all samples: every positive is predicted positive
                let mut err_above: f64 = w
                    .iter()
                    .zip(y.iter())
                    .map(|(&wi, &yi)| if yi < 0.0 { wi } else { 0.0 })
                    .sum();
                let consider = |err_above: f64, threshold: f64, best: &mut (f64, usize, f64, f64)| {
                    for (e, polarity) in [(err_above, 1.0), (1.0 - err_above, -1.0)] {
                        if e < best.0 - 1e-15 {
                            *best = (e, j, threshold, polarity);
                        }
                    }
                };
                consider(err_above, f64::NEG_INFINITY, &mut best);
                let mut k = 0usize;
                while k < n {
                    // advance over ties so thresholds sit between distinct values
                    let v = features[order[k]][j];
                    while k < n && features[order[k]][j] == v {
                        let i = order[k];
                        // moving the threshold above sample i flips its side
                        if y[i] > 0.0 {
                            err_above += w[i];
                        } else {
                            err_above -= w[i];
                        }
                        k += 1;
                    }
                    let threshold = if k < n {
                        0.5 * (v + features[order[k]][j])
                    } else {
                        v
                    };
                    consider(err_above, threshold, &mut best);
                }
            }
            let (err, feature, threshold, polarity) = best;
            let err = err.clamp(1e-10, 1.0 - 1e-10);
            let alpha = 0.5 * libm::log((1.0 - err) / err);
            let stump = Stump {
                feature,
                threshold,
                polarity,
                alpha,
            };
            // reweight and renormalize
            let mut total = 0.0;
            for i in 0..n {
                w[i] *= libm::exp(-alpha * y[i] * stump.predict(&features[i]));
                total += w[i];
            }
            for wi in &mut w {
                *wi /= total;
            }
            stumps.push(stump);
            if err <= 1e-10 {
                break; // perfectly separated
            }
        }
        AdaBoostStumps { stumps }
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.predict(x)).sum()
    }
}

/// Linear discriminant with a Ledoit-Wolf-shrunk pooled covariance.
struct ShrinkageLda {
    weights: Vec<f64>,
}

impl ShrinkageLda {
    fn fit(features: &[Vec<f64>], labels: &[bool]) -> CoreResult<ShrinkageLda> {
        let n = features.len();
        let p = features[0].len();
        let mut mean_pos = vec![0.0f64; p];
        let mut mean_neg = vec![0.0f64; p];
        let n_pos = labels.iter().filter(|&&l| l).count();
        let n_neg = n - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(CoreError::Input("discriminant needs both classes".into()));
        }
        for (x, &l) in features.iter().zip(labels.iter()) {
            let target = if l { &mut mean_pos } else { &mut mean_neg };
            for (m, &v) in target.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        for m in &mut mean_pos {
            *m /= n_pos as f64;
        }
        for m in &mut mean_neg {
            *m /= n_neg as f64;
        }

        // pooled within-class scatter
        let centered: Vec<Vec<f64>> = features
            .iter()
            .zip(labels.iter())
            .map(|(x, &l)| {
                let m = if l { &mean_pos } else { &mean_neg };
                x.iter().zip(m.iter()).map(|(&v, &mv)| v - mv).collect()
            })
            .collect();
        let mut cov = vec![0.0f64; p * p];
        for x in &centered {
            for a in 0..p {
                let xa = x[a];
                for b in 0..p {
                    cov[a * p + b] += xa * x[b];
                }
            }
        }
        for c in &mut cov {
            *c /= n as f64;
        }

        // Ledoit-Wolf shrinkage toward the scaled identity
        let mu = (0..p).map(|a| cov[a * p + a]).sum::<f64>() / p as f64;
        let mut d2 = 0.0;
        for a in 0..p {
            for b in 0..p {
                let target = if a == b { mu } else { 0.0 };
                d2 += (cov[a * p + b] - target) * (cov[a * p + b] - target);
            }
        }
        d2 /= p as f64;
        let mut b2_sum = 0.0;
        for x in &centered {
            let mut norm = 0.0;
            for a in 0..p {
                for b in 0..p {
                    let o = x[a] * x[b] - cov[a * p + b];
                    norm += o * o;
                }
            }
            b2_sum += norm / p as f64;
        }
        let b2 = (b2_sum / (n as f64 * n as f64)).min(d2);
        let shrink = if d2 > 0.0 { b2 / d2 } else { 1.0 };
        for a in 0..p {
            for b in 0..p {
                let target = if a == b { mu } else { 0.0 };
                cov[a * p + b] = (1.0 - shrink) * cov[a * p + b] + shrink * target;
            }
        }
        // guard against a residually singular matrix
        for a in 0..p {
            cov[a * p + a] += 1e-9 * mu.max(1e-12);
        }

        let diff: Vec<f64> = mean_pos
            .iter()
            .zip(mean_neg.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        let weights = solve_spd(&cov, &diff, p)?;
        Ok(ShrinkageLda { weights })
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x.iter()).map(|(&w, &v)| w * v).sum()
    }
}

/// Cholesky solve of a symmetric positive-definite system.
fn solve_spd(a: &[f64], rhs: &[f64], p: usize) -> CoreResult<Vec<f64>> {
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(CoreError::Input(format!(
                        "covariance not positive definite at pivot {i}"
                    )));
                }
                l[i * p + j] = libm::sqrt(sum);
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0f64; p];
    for i in 0..p {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * p + k] * y[k];
        }
        y[i] = sum / l[i * p + i];
    }
    let mut x = vec![0.0f64; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in i + 1..p {
            sum -= l[k * p + i] * x[k];
        }
        x[i] = sum / l[i * p + i];
    }
    Ok(x)
}

/// L1-loss linear SVM trained by dual coordinate descent, bias handled by an
/// augmented constant feature.
struct LinearSvm {
    weights: Vec<f64>,
}

impl LinearSvm {
    fn fit(features: &[Vec<f64>], labels: &[bool], seed: u64) -> LinearSvm {
        let n = features.len();
        let p = features[0].len() + 1;
        let aug = |x: &[f64]| -> Vec<f64> {
            let mut v = x.to_vec();
            v.push(1.0);
            v
        };
        let xs: Vec<Vec<f64>> = features.iter().map(|x| aug(x)).collect();
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let q_diag: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
        let mut alpha = vec![0.0f64; n];
        let mut w = vec![0.0f64; p];
        let mut rng = Rng::from_seed(seed);
        for _ in 0..SVM_EPOCHS {
            let order = rng.permutation(n);
            let mut max_change = 0.0f64;
            for &i in &order {
                let margin: f64 = w.iter().zip(xs[i].iter()).map(|(&a, &b)| a * b).sum();
                let grad = y[i] * margin - 1.0;
                let old = alpha[i];
                let new = (old - grad / q_diag[i].max(1e-12)).clamp(0.0, SVM_C);
                let delta = new - old;
                if delta != 0.0 {
                    alpha[i] = new;
                    for (wk, &xk) in w.iter_mut().zip(xs[i].iter()) {
                        *wk += delta * y[i] * xk;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < 1e-8 {
                break;
            }
        }
        LinearSvm { weights: w }
    }

    fn score(&self, x: &[f64]) -> f64 {
        let body: f64 = self
            .weights
            .iter()
            .zip(x.iter())
            .map(|(&w, &v)| w * v)
            .sum();
        body + self.weights[self.weights.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One perfectly separating feature plus noise columns.
    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = Rng::from_seed(seed);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2 == 0;
            let x0 = if label {
                rng.uniform(1.0, 2.0)
            } else {
                rng.uniform(-2.0, -1.0)
            };
            features.push(alloc::vec![x0, rng.next_normal(), rng.next_normal()]);
            labels.push(label);
        }
        (features, labels)
    }

    fn noise_only(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = Rng::from_seed(seed);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.next_normal()).collect())
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        rng.shuffle(&mut labels);
        (features, labels)
    }

    #[test]
    fn perfectly_separable_scores_one() {
        let (x, y) = separable(60, 1);
        for kind in ClassifierKind::ALL {
            let res = cross_validated_auc(&x, &y, kind, 5, 7).unwrap();
            assert!(
                res.mean_auc > 0.999,
                "{}: auc {}",
                kind.as_str(),
                res.mean_auc
            );
        }
    }

    #[test]
    fn shuffled_labels_score_chance() {
        let (x, y) = noise_only(500, 2);
        for kind in ClassifierKind::ALL {
            let res = cross_validated_auc(&x, &y, kind, 5, 11).unwrap();
            assert!(
                (0.4..0.6).contains(&res.mean_auc),
                "{}: auc {}",
                kind.as_str(),
                res.mean_auc
            );
        }
    }

    #[test]
    fn determinism_across_runs() {
        let (x, y) = separable(40, 3);
        for kind in ClassifierKind::ALL {
            let a = cross_validated_auc(&x, &y, kind, 5, 5).unwrap();
            let b = cross_validated_auc(&x, &y, kind, 5, 5).unwrap();
            assert_eq!(a.fold_aucs, b.fold_aucs, "{}", kind.as_str());
        }
    }

    #[test]
    fn stratified_folds_cover_both_classes() {
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let assignment = stratified_folds(&labels, 5, 9);
        for fold in 0..5 {
            let pos = labels
                .iter()
                .zip(assignment.iter())
                .filter(|(&l, &f)| l && f == fold)
                .count();
            let neg = labels
                .iter()
                .zip(assignment.iter())
                .filter(|(&l, &f)| !l && f == fold)
                .count();
            assert!(pos >= 1 && neg >= 1, "fold {fold}: {pos}/{neg}");
        }
    }

    #[test]
    fn single_class_is_error() {
        let x = alloc::vec![alloc::vec![0.0f64; 2]; 10];
        let y = alloc::vec![true; 10];
        assert!(cross_validated_auc(&x, &y, ClassifierKind::Lda, 5, 1).is_err());
    }

    #[test]
    fn spd_solver_inverts_known_system() {
        // A = [[4,2],[2,3]], b = [2, 5] -> x = [-0.5, 2]
        let a = alloc::vec![4.0, 2.0, 2.0, 3.0];
        let b = alloc::vec![2.0, 5.0];
        let x = solve_spd(&a, &b, 2).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn lda_handles_more_features_than_samples() {
        // shrinkage keeps the covariance invertible at p > n
        let mut rng = Rng::from_seed(4);
        let n = 30;
        let p = 50;
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let mut row: Vec<f64> = (0..p).map(|_| rng.next_normal()).collect();
            row[0] += if label { 2.0 } else { -2.0 };
            x.push(row);
            y.push(label);
        }
        let res = cross_validated_auc(&x, &y, ClassifierKind::Lda, 5, 3).unwrap();
        assert!(res.mean_auc > 0.8, "auc {}", res.mean_auc);
    }
}
