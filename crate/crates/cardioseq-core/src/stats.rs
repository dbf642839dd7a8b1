//! Statistical helpers: correlation, rank statistics, Welch's test, AUC.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};

/// Pearson correlation between two equal-length samples.
///
/// Returns `None` when either column is constant (undefined correlation).
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of every column of `left` against every column of
/// `right`; both are row-major `n x k` matrices over the same `n` rows.
/// Constant columns produce `None` entries, never zero.
pub fn pearson_matrix(
    left: &[Vec<f64>],
    right: &[Vec<f64>],
) -> CoreResult<Vec<Vec<Option<f64>>>> {
    let n = left.len();
    if n < 3 {
        return Err(CoreError::Input(format!(
            "correlation needs at least 3 rows, got {n}"
        )));
    }
    if right.len() != n {
        return Err(CoreError::Shape(format!(
            "row mismatch: {n} vs {}",
            right.len()
        )));
    }
    let k_left = left[0].len();
    let k_right = right[0].len();
    let column = |rows: &[Vec<f64>], j: usize| -> Vec<f64> {
        rows.iter().map(|r| r[j]).collect()
    };
    let mut out = Vec::with_capacity(k_left);
    for i in 0..k_left {
        let xi = column(left, i);
        let mut row = Vec::with_capacity(k_right);
        for j in 0..k_right {
            row.push(pearson(&xi, &column(right, j)));
        }
        out.push(row);
    }
    Ok(out)
}

/// Midranks (average ranks for ties), 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = alloc::vec![0.0f64; n];
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (midranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&midranks(x), &midranks(y))
}

/// One-sided Welch's t-test for `mean(a) > mean(b)`.
///
/// Returns `(t, degrees_of_freedom, p_value)` with the Welch-Satterthwaite
/// degrees of freedom.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> CoreResult<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CoreError::Input(format!(
            "welch test needs >= 2 samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], m: f64| {
        s.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (s.len() as f64 - 1.0)
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        // both groups constant: degenerate but well-defined ordering
        return Ok(if ma > mb {
            (f64::INFINITY, na + nb - 2.0, 0.0)
        } else {
            (0.0, na + nb - 2.0, 1.0)
        });
    }
    let t = (ma - mb) / libm::sqrt(se2);
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let p = 1.0 - student_t_cdf(t, df);
    Ok((t, df, p))
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Regularized incomplete beta function `I_x(a, b)` via the continued
/// fraction expansion.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * libm::log(x) + b * libm::log(1.0 - x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz continued fraction for the incomplete beta function.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-14;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Log-gamma via the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = core::f64::consts::PI;
        return libm::log(pi / libm::sin(pi * x)) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * libm::log(2.0 * core::f64::consts::PI) + (x + 0.5) * libm::log(t) - t + libm::log(acc)
}

/// Area under the ROC curve via the rank statistic (midranks handle ties).
///
/// `labels[i]` is true for positives; both classes must be present.
pub fn auc(scores: &[f64], labels: &[bool]) -> CoreResult<f64> {
    if scores.len() != labels.len() {
        return Err(CoreError::Shape(format!(
            "scores/labels length mismatch: {} vs {}",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CoreError::Input(format!(
            "AUC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels.iter())
        .filter(|(_, &l)| l)
        .map(|(&r, _)| r)
        .sum();
    let n_pos_f = n_pos as f64;
    Ok((rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;

    #[test]
    fn pearson_perfect_correlations() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_column_undefined() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn pearson_matrix_shapes_and_affine_invariance() {
        let mut rng = Rng::from_seed(1);
        let left: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let right: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let m = pearson_matrix(&left, &right).unwrap();
        assert_eq!((m.len(), m[0].len()), (3, 2));
        for row in &m {
            for &r in row {
                let r = r.unwrap();
                assert!((-1.0..=1.0).contains(&r));
            }
        }
        // positive affine rescale of a right column leaves r unchanged
        let mut scaled = right.clone();
        for row in &mut scaled {
            row[0] = 5.0 * row[0] + 2.0;
        }
        let m2 = pearson_matrix(&left, &scaled).unwrap();
        for (a, b) in m.iter().zip(m2.iter()) {
            assert!((a[0].unwrap() - b[0].unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_independent_gaussians_mostly_uncorrelated() {
        let mut rng = Rng::from_seed(77);
        let n = 1000;
        let left: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.next_normal()).collect())
            .collect();
        let right: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..7).map(|_| rng.next_normal()).collect())
            .collect();
        let matrix = pearson_matrix(&left, &right).unwrap();
        let total = 8 * 7;
        let small = matrix
            .iter()
            .flatten()
            .filter(|r| r.unwrap().abs() < 0.15)
            .count();
        assert!(
            small as f64 >= 0.95 * total as f64,
            "only {small}/{total} entries below 0.15"
        );
    }

    #[test]
    fn spearman_monotone_transform_invariance() {
        let x = [0.4, 1.5, 2.0, 3.2, 7.7];
        let y: Vec<f64> = x.iter().map(|v| v * v * v + 1.0).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn ln_gamma_known_values() {
        // gamma(5) = 24
        assert!((ln_gamma(5.0) - libm::log(24.0)).abs() < 1e-10);
        // gamma(0.5) = sqrt(pi)
        assert!((ln_gamma(0.5) - 0.5 * libm::log(core::f64::consts::PI)).abs() < 1e-10);
    }

    #[test]
    fn student_t_cdf_reference_values() {
        // symmetric around zero
        assert!((student_t_cdf(0.0, 7.0) - 0.5).abs() < 1e-12);
        // df=1 is Cauchy: F(1) = 3/4
        assert!((student_t_cdf(1.0, 1.0) - 0.75).abs() < 1e-10);
        // large df approaches the normal: F(1.96, 1e6) ~ 0.975
        assert!((student_t_cdf(1.959_963_985, 1e6) - 0.975).abs() < 1e-4);
    }

    #[test]
    fn welch_detects_separated_means() {
        let mut rng = Rng::from_seed(2);
        let a: Vec<f64> = (0..50).map(|_| 1.0 + rng.next_normal() * 0.5).collect();
        let b: Vec<f64> = (0..60).map(|_| rng.next_normal() * 0.5).collect();
        let (t, _, p) = welch_one_sided(&a, &b).unwrap();
        assert!(t > 5.0, "t {t}");
        assert!(p < 1e-6, "p {p}");
        // reversed direction: p near 1
        let (_, _, p_rev) = welch_one_sided(&b, &a).unwrap();
        assert!(p_rev > 0.999, "p_rev {p_rev}");
    }

    #[test]
    fn welch_null_is_uniformish() {
        let mut rng = Rng::from_seed(3);
        let a: Vec<f64> = (0..40).map(|_| rng.next_normal()).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.next_normal()).collect();
        let (_, _, p) = welch_one_sided(&a, &b).unwrap();
        assert!((0.001..0.999).contains(&p), "p {p}");
    }

    #[test]
    fn auc_basics() {
        // perfectly separable
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
        // inverted
        let labels_inv = [true, true, false, false];
        assert_eq!(auc(&scores, &labels_inv).unwrap(), 0.0);
        // all-tied scores: 0.5 by midranks
        let tied = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(auc(&tied, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_invariant_under_increasing_transform() {
        let mut rng = Rng::from_seed(4);
        let scores: Vec<f64> = (0..100).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let labels: Vec<bool> = scores
            .iter()
            .map(|&s| s + rng.next_normal() > 0.0)
            .collect();
        let base = auc(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|&s| libm::exp(3.0 * s) + 7.0).collect();
        let t = auc(&transformed, &labels).unwrap();
        assert!((base - t).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_is_error() {
        assert!(auc(&[0.3, 0.7], &[true, true]).is_err());
    }
}
