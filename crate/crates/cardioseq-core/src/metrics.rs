//! Surface-distance and distribution-similarity metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};

/// Default number of histogram bins for the discrete KL divergence.
pub const DEFAULT_KL_BINS: usize = 20;
/// Per-bin smoothing mass added before normalizing the histograms.
pub const KL_SMOOTHING_EPS: f64 = 1e-8;

fn min_distance(p: &[f64; 3], set: &[[f64; 3]]) -> f64 {
    let mut best = f64::INFINITY;
    for q in set {
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        let dz = p[2] - q[2];
        let sq = dx * dx + dy * dy + dz * dz;
        if sq < best {
            best = sq;
        }
    }
    libm::sqrt(best)
}

fn check_nonempty(a: &[[f64; 3]], b: &[[f64; 3]], what: &str) -> CoreResult<()> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::Input(format!(
            "{what} needs non-empty point sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Hausdorff distance: `max(max_a min_b ||a-b||, max_b min_a ||a-b||)`.
pub fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]]) -> CoreResult<f64> {
    check_nonempty(a, b, "hausdorff distance")?;
    let mut worst = 0.0f64;
    for p in a {
        worst = worst.max(min_distance(p, b));
    }
    for q in b {
        worst = worst.max(min_distance(q, a));
    }
    Ok(worst)
}

/// Average symmetric surface distance over the sampled vertices:
/// all nearest-neighbor distances pooled over both directions, divided by
/// `n + m`. Always `<=` the Hausdorff distance of the same sets.
pub fn assd(a: &[[f64; 3]], b: &[[f64; 3]]) -> CoreResult<f64> {
    check_nonempty(a, b, "average symmetric surface distance")?;
    let mut sum_a = 0.0f64;
    for p in a {
        sum_a += min_distance(p, b);
    }
    let mut sum_b = 0.0f64;
    for q in b {
        sum_b += min_distance(q, a);
    }
    // combined commutatively so the metric is bit-exactly symmetric
    Ok((sum_a + sum_b) / (a.len() + b.len()) as f64)
}

/// Discrete KL divergence `D(p || q)` between two sample sets.
///
/// Both sets are histogrammed over shared equal-width bins spanning the
/// combined sample range; both histograms receive `KL_SMOOTHING_EPS` mass per
/// bin and are renormalized. A zero-width combined range (all samples equal)
/// returns 0 by convention.
pub fn histogram_kl(p_samples: &[f64], q_samples: &[f64], bins: usize) -> CoreResult<f64> {
    histogram_kl_with_smoothing(p_samples, q_samples, bins, KL_SMOOTHING_EPS)
}

/// [`histogram_kl`] with an explicit per-bin smoothing mass; more smoothing
/// strictly tempers the divergence of disjoint supports.
pub fn histogram_kl_with_smoothing(
    p_samples: &[f64],
    q_samples: &[f64],
    bins: usize,
    smoothing: f64,
) -> CoreResult<f64> {
    if p_samples.is_empty() || q_samples.is_empty() {
        return Err(CoreError::Input(format!(
            "histogram KL needs non-empty samples, got {} and {}",
            p_samples.len(),
            q_samples.len()
        )));
    }
    if bins == 0 {
        return Err(CoreError::Param("histogram KL needs at least one bin".into()));
    }
    if !(smoothing > 0.0) {
        return Err(CoreError::Param(format!(
            "histogram KL smoothing must be > 0, got {smoothing}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in p_samples.iter().chain(q_samples.iter()) {
        if !x.is_finite() {
            return Err(CoreError::Input(format!("non-finite sample {x}")));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if hi <= lo {
        return Ok(0.0);
    }
    let hist = |samples: &[f64]| -> Vec<f64> {
        let mut h = alloc::vec![smoothing; bins];
        for &x in samples {
            let mut b = ((x - lo) / (hi - lo) * bins as f64) as usize;
            if b >= bins {
                b = bins - 1;
            }
            h[b] += 1.0;
        }
        let total: f64 = h.iter().sum();
        for v in &mut h {
            *v /= total;
        }
        h
    };
    let p = hist(p_samples);
    let q = hist(q_samples);
    let mut kl = 0.0;
    for (pi, qi) in p.iter().zip(q.iter()) {
        kl += pi * libm::log(pi / qi);
    }
    // smoothing can leave a tiny negative residue when p == q
    Ok(kl.max(0.0))
}

/// 1-Wasserstein distance between two empirical distributions: the integral
/// of `|CDF_p - CDF_q|`. Handles unequal sample counts.
pub fn wasserstein_1d(p_samples: &[f64], q_samples: &[f64]) -> CoreResult<f64> {
    if p_samples.is_empty() || q_samples.is_empty() {
        return Err(CoreError::Input(format!(
            "wasserstein distance needs non-empty samples, got {} and {}",
            p_samples.len(),
            q_samples.len()
        )));
    }
    let mut p: Vec<f64> = p_samples.to_vec();
    let mut q: Vec<f64> = q_samples.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    q.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let np = p.len() as f64;
    let nq = q.len() as f64;
    let mut i = 0usize;
    let mut j = 0usize;
    let mut dist = 0.0f64;
    let mut prev = f64::NAN;
    while i < p.len() || j < q.len() {
        let x = match (p.get(i), q.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        if prev.is_finite() && x > prev {
            let cdf_p = i as f64 / np;
            let cdf_q = j as f64 / nq;
            dist += (cdf_p - cdf_q).abs() * (x - prev);
        }
        while i < p.len() && p[i] <= x {
            i += 1;
        }
        while j < q.len() && q[j] <= x {
            j += 1;
        }
        prev = x;
    }
    Ok(dist)
}
