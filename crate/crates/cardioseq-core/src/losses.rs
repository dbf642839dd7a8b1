//! Training loss terms with analytic gradients.
//!
//! All three terms are implemented as pure f64 functions so the same code
//! path serves the optimizer (through the autodiff tape) and the
//! finite-difference verification suite.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Default weight of the KL term.
pub const DEFAULT_BETA: f64 = 0.01;
/// Default weight of the smoothing term.
pub const DEFAULT_LAMBDA_S: f64 = 1.0;

/// One evaluation of the weighted training objective.
///
/// `kl` is stored with its `beta` weight already applied, `smoothing` is
/// unweighted; `total = reconstruction + kl + lambda_s * smoothing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub smoothing: f64,
    pub total: f64,
    pub beta: f64,
    pub lambda_s: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.reconstruction.is_finite()
            && self.kl.is_finite()
            && self.smoothing.is_finite()
    }
}

/// Combines the three loss components into a breakdown.
pub fn total_loss(
    reconstruction: f64,
    kl: f64,
    smoothing: f64,
    lambda_s: f64,
    beta: f64,
) -> LossBreakdown {
    LossBreakdown {
        reconstruction,
        kl,
        smoothing,
        total: reconstruction + kl + lambda_s * smoothing,
        beta,
        lambda_s,
    }
}

/// Chamfer distance: the sum of the two directed mean nearest-neighbor
/// distances (no 1/2 factor). Zero iff the two sets are equal as sets.
pub fn chamfer_distance(a: &[[f64; 3]], b: &[[f64; 3]]) -> CoreResult<f64> {
    Ok(chamfer_with_grad(a, b)?.0)
}

/// Chamfer distance plus gradients with respect to both point sets.
///
/// Nearest-neighbor assignments are treated as locally constant; points at
/// exactly zero distance contribute a zero (sub)gradient.
pub fn chamfer_with_grad(
    a: &[[f64; 3]],
    b: &[[f64; 3]],
) -> CoreResult<(f64, Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::Input(format!(
            "chamfer distance needs non-empty point sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut grad_a = vec![[0.0f64; 3]; a.len()];
    let mut grad_b = vec![[0.0f64; 3]; b.len()];
    let planar_a = Planar::new(a);
    let planar_b = Planar::new(b);
    let inv_n = 1.0 / a.len() as f64;
    let mut sum_a = 0.0f64;
    for (i, p) in a.iter().enumerate() {
        let (j, d) = planar_b.nearest(p);
        sum_a += d;
        if d > 0.0 {
            let w = inv_n / d;
            for k in 0..3 {
                let diff = (p[k] - b[j][k]) * w;
                grad_a[i][k] += diff;
                grad_b[j][k] -= diff;
            }
        }
    }
    let inv_m = 1.0 / b.len() as f64;
    let mut sum_b = 0.0f64;
    for (j, q) in b.iter().enumerate() {
        let (i, d) = planar_a.nearest(q);
        sum_b += d;
        if d > 0.0 {
            let w = inv_m / d;
            for k in 0..3 {
                let diff = (q[k] - a[i][k]) * w;
                grad_b[j][k] += diff;
                grad_a[i][k] -= diff;
            }
        }
    }
    // the two directed sums are combined commutatively, so swapping the
    // arguments yields the bit-identical value
    Ok((sum_a * inv_n + sum_b * inv_m, grad_a, grad_b))
}

/// Planar (structure-of-arrays) copy of a point set; the nearest-neighbor
/// scan vectorizes over contiguous coordinate streams.
struct Planar {
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
}

impl Planar {
    fn new(set: &[[f64; 3]]) -> Planar {
        Planar {
            xs: set.iter().map(|p| p[0]).collect(),
            ys: set.iter().map(|p| p[1]).collect(),
            zs: set.iter().map(|p| p[2]).collect(),
        }
    }

    /// First index attaining the minimal distance (strict-less scan
    /// semantics) and that distance. Runs four lanes in parallel so the
    /// compare/select pattern vectorizes; the lane merge and scalar tail
    /// reproduce the sequential first-minimum tie-break exactly.
    fn nearest(&self, p: &[f64; 3]) -> (usize, f64) {
        let n = self.xs.len();
        let mut lane_val = [f64::INFINITY; 4];
        let mut lane_idx = [0.0f64; 4];
        let chunks = n / 4 * 4;
        let mut base = 0.0f64;
        for ((xc, yc), zc) in self.xs[..chunks]
            .chunks_exact(4)
            .zip(self.ys[..chunks].chunks_exact(4))
            .zip(self.zs[..chunks].chunks_exact(4))
        {
            for k in 0..4 {
                let dx = p[0] - xc[k];
                let dy = p[1] - yc[k];
                let dz = p[2] - zc[k];
                let sq = dx * dx + dy * dy + dz * dz;
                let better = sq < lane_val[k];
                lane_val[k] = if better { sq } else { lane_val[k] };
                lane_idx[k] = if better { base + k as f64 } else { lane_idx[k] };
            }
            base += 4.0;
        }
        // merge lanes by (value, index): the earliest index among equals wins
        let mut best_sq = f64::INFINITY;
        let mut best = usize::MAX;
        for k in 0..4 {
            let idx = lane_idx[k] as usize;
            if lane_val[k] < best_sq || (lane_val[k] == best_sq && idx < best) {
                best_sq = lane_val[k];
                best = idx;
            }
        }
        for j in chunks..n {
            let dx = p[0] - self.xs[j];
            let dy = p[1] - self.ys[j];
            let dz = p[2] - self.zs[j];
            let sq = dx * dx + dy * dy + dz * dz;
            if sq < best_sq {
                best_sq = sq;
                best = j;
            }
        }
        (best, libm::sqrt(best_sq))
    }
}

/// Mean per-frame Chamfer distance between two sequences of vertex sets.
pub fn reconstruction_loss(recon: &[Vec<[f64; 3]>], target: &[Vec<[f64; 3]>]) -> CoreResult<f64> {
    if recon.len() != target.len() {
        return Err(CoreError::Shape(format!(
            "frame-count mismatch: reconstruction has {} frames, target {}",
            recon.len(),
            target.len()
        )));
    }
    if recon.is_empty() {
        return Err(CoreError::Input("reconstruction loss needs at least one frame".into()));
    }
    let mut sum = 0.0;
    for (r, t) in recon.iter().zip(target.iter()) {
        sum += chamfer_distance(r, t)?;
    }
    Ok(sum / recon.len() as f64)
}

/// beta-weighted KL divergence from `N(mu, diag(exp(logvar)))` to `N(0, I)`,
/// summed over latent dimensions.
pub fn kl_loss(mu: &[f64], logvar: &[f64], beta: f64) -> f64 {
    let mut acc = 0.0;
    for (&m, &lv) in mu.iter().zip(logvar.iter()) {
        acc += 1.0 + lv - m * m - libm::exp(lv);
    }
    beta * (-0.5) * acc
}

/// KL loss plus gradients with respect to `mu` and `logvar`.
pub fn kl_loss_with_grad(mu: &[f64], logvar: &[f64], beta: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let value = kl_loss(mu, logvar, beta);
    let grad_mu: Vec<f64> = mu.iter().map(|&m| beta * m).collect();
    let grad_logvar: Vec<f64> = logvar
        .iter()
        .map(|&lv| beta * (-0.5) * (1.0 - libm::exp(lv)))
        .collect();
    (value, grad_mu, grad_logvar)
}

/// Mean distance of each vertex to its neighborhood centroid for one frame:
/// `(1/V) * sum_i || (1/|N_i|) * sum_{j in N_i} (v_j - v_i) ||_2`.
/// Vertices without neighbors contribute zero.
pub fn laplacian_frame(vertices: &[[f64; 3]], adjacency: &[Vec<u32>]) -> f64 {
    laplacian_frame_with_grad(vertices, adjacency).0
}

/// Frame smoothing term plus its gradient with respect to the vertices.
pub fn laplacian_frame_with_grad(
    vertices: &[[f64; 3]],
    adjacency: &[Vec<u32>],
) -> (f64, Vec<[f64; 3]>) {
    let v = vertices.len();
    let mut value = 0.0;
    let mut grad = vec![[0.0f64; 3]; v];
    if v == 0 {
        return (0.0, grad);
    }
    let inv_v = 1.0 / v as f64;
    for (i, p) in vertices.iter().enumerate() {
        let neighbors = &adjacency[i];
        if neighbors.is_empty() {
            continue;
        }
        let inv_n = 1.0 / neighbors.len() as f64;
        let mut delta = [0.0f64; 3];
        for &j in neighbors {
            let q = &vertices[j as usize];
            for k in 0..3 {
                delta[k] += (q[k] - p[k]) * inv_n;
            }
        }
        let norm = libm::sqrt(delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]);
        value += norm * inv_v;
        if norm > 0.0 {
            let w = inv_v / norm;
            for k in 0..3 {
                let d = delta[k] * w;
                grad[i][k] -= d;
                for &j in neighbors {
                    grad[j as usize][k] += d * inv_n;
                }
            }
        }
    }
    (value, grad)
}

/// Smoothing loss averaged over the frames of a sequence.
pub fn laplacian_loss(frames: &[Vec<[f64; 3]>], adjacency: &[Vec<u32>]) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    let sum: f64 = frames.iter().map(|f| laplacian_frame(f, adjacency)).sum();
    sum / frames.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_adjacency;
    use crate::rng::Rng;

    fn random_points(rng: &mut Rng, n: usize, scale: f64) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| {
                [
                    rng.uniform(-scale, scale),
                    rng.uniform(-scale, scale),
                    rng.uniform(-scale, scale),
                ]
            })
            .collect()
    }

    /// Independent quadratic-scan oracle for the Chamfer definition.
    fn chamfer_oracle(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        let dist = |p: &[f64; 3], q: &[f64; 3]| -> f64 {
            libm::sqrt(
                (p[0] - q[0]) * (p[0] - q[0])
                    + (p[1] - q[1]) * (p[1] - q[1])
                    + (p[2] - q[2]) * (p[2] - q[2]),
            )
        };
        let mut first = 0.0;
        for p in a {
            let mut best = f64::INFINITY;
            for q in b {
                best = best.min(dist(p, q));
            }
            first += best;
        }
        let mut second = 0.0;
        for q in b {
            let mut best = f64::INFINITY;
            for p in a {
                best = best.min(dist(p, q));
            }
            second += best;
        }
        first / a.len() as f64 + second / b.len() as f64
    }

    #[test]
    fn chamfer_identical_sets_zero() {
        let mut rng = Rng::from_seed(1);
        let a = random_points(&mut rng, 12, 5.0);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_single_points() {
        let d = chamfer_distance(&[[0.0, 0.0, 0.0]], &[[1.0, 0.0, 0.0]]).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_matches_oracle() {
        let mut rng = Rng::from_seed(2);
        for _ in 0..50 {
            let a = random_points(&mut rng, 7, 3.0);
            let b = random_points(&mut rng, 9, 3.0);
            let d = chamfer_distance(&a, &b).unwrap();
            assert!((d - chamfer_oracle(&a, &b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn chamfer_symmetric_and_translation_invariant() {
        let mut rng = Rng::from_seed(3);
        for _ in 0..20 {
            let a = random_points(&mut rng, 8, 2.0);
            let b = random_points(&mut rng, 6, 2.0);
            let d_ab = chamfer_distance(&a, &b).unwrap();
            let d_ba = chamfer_distance(&b, &a).unwrap();
            assert_eq!(d_ab, d_ba);
            let t = [rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), 4.2];
            let shift = |s: &[[f64; 3]]| -> Vec<[f64; 3]> {
                s.iter().map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]]).collect()
            };
            let d_shift = chamfer_distance(&shift(&a), &shift(&b)).unwrap();
            assert!((d_ab - d_shift).abs() <= 1e-9);
        }
    }

    #[test]
    fn chamfer_empty_is_error() {
        assert!(chamfer_distance(&[], &[[0.0; 3]]).is_err());
    }

    #[test]
    fn reconstruction_loss_mean_over_frames() {
        // frames engineered for per-frame Chamfer values 2.0 and 0.0
        let f0_a = vec![[0.0, 0.0, 0.0]];
        let f0_b = vec![[1.0, 0.0, 0.0]];
        let f1 = vec![[3.0, -1.0, 2.0]];
        let loss =
            reconstruction_loss(&[f0_a, f1.clone()], &[f0_b, f1.clone()]).unwrap();
        assert!((loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_loss_zero_on_equal() {
        let mut rng = Rng::from_seed(4);
        let frames: Vec<Vec<[f64; 3]>> =
            (0..3).map(|_| random_points(&mut rng, 5, 1.0)).collect();
        assert_eq!(reconstruction_loss(&frames, &frames).unwrap(), 0.0);
    }

    #[test]
    fn reconstruction_frame_mismatch_is_error() {
        let a = vec![vec![[0.0; 3]]];
        let b = vec![vec![[0.0; 3]], vec![[0.0; 3]]];
        assert!(matches!(
            reconstruction_loss(&a, &b),
            Err(CoreError::Shape(_))
        ));
    }

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(kl_loss(&[0.0; 4], &[0.0; 4], 0.01), 0.0);
        // KL(N(1,1) || N(0,1)) = 0.5, scaled by beta
        let v = kl_loss(&[1.0], &[0.0], 0.01);
        assert!((v - 0.005).abs() < 1e-15, "{v}");
        assert_eq!(kl_loss(&[3.0, -2.0], &[1.5, -0.3], 0.0), 0.0);
    }

    #[test]
    fn kl_nonnegative_property() {
        let mut rng = Rng::from_seed(5);
        for _ in 0..500 {
            let mu: Vec<f64> = (0..6).map(|_| rng.uniform(-4.0, 4.0)).collect();
            let lv: Vec<f64> = (0..6).map(|_| rng.uniform(-5.0, 3.0)).collect();
            assert!(kl_loss(&mu, &lv, 0.37) >= 0.0);
        }
    }

    #[test]
    fn laplacian_path_and_square() {
        // three collinear vertices with unit spacing, edges 0-1 and 1-2
        let verts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let adj = vec![vec![1u32], vec![0, 2], vec![1]];
        let v = laplacian_frame(&verts, &adj);
        assert!((v - 2.0 / 3.0).abs() < 1e-15, "{v}");

        // unit square ring
        let verts = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let adj = vec![vec![1u32, 3], vec![0, 2], vec![1, 3], vec![0, 2]];
        let v = laplacian_frame(&verts, &adj);
        let expect = libm::sqrt(2.0) / 2.0;
        assert!((v - expect).abs() < 1e-15, "{v}");
    }

    #[test]
    fn laplacian_zero_iff_centroidal() {
        let verts = [[1.0, 2.0, 3.0]; 5];
        let adj = build_adjacency(&[[0, 1, 2], [2, 3, 4]], 5).unwrap();
        assert_eq!(laplacian_frame(&verts, &adj), 0.0);
        // perturb one vertex: strictly positive
        let mut moved = verts;
        moved[2][0] += 0.5;
        assert!(laplacian_frame(&moved, &adj) > 0.0);
    }

    #[test]
    fn laplacian_isolated_vertices_contribute_zero() {
        let verts = [[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]];
        let adj = vec![Vec::new(), Vec::new()];
        assert_eq!(laplacian_frame(&verts, &adj), 0.0);
    }

    #[test]
    fn total_loss_arithmetic() {
        let b = total_loss(1.0, 0.005, 0.2, 1.0, 0.01);
        assert!((b.total - 1.205).abs() < 1e-15);
        let b = total_loss(1.0, 0.005, 0.2, 0.0, 0.01);
        assert!((b.total - 1.005).abs() < 1e-15);
        assert_eq!((b.beta, b.lambda_s), (0.01, 0.0));
    }

    // ---- analytic vs finite-difference gradients ----

    fn central_diff(f: &mut dyn FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn assert_grad_close(analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
        assert!(err <= 1e-4, "grad {analytic} vs {numeric} (rel {err:.3e})");
    }

    /// Rejects inputs where nearest-neighbor ties would flip under the
    /// finite-difference step.
    fn has_near_tie(a: &[[f64; 3]], b: &[[f64; 3]]) -> bool {
        let gap_ok = |p: &[f64; 3], set: &[[f64; 3]]| -> bool {
            let mut d: Vec<f64> = set
                .iter()
                .map(|q| {
                    libm::sqrt(
                        (p[0] - q[0]) * (p[0] - q[0])
                            + (p[1] - q[1]) * (p[1] - q[1])
                            + (p[2] - q[2]) * (p[2] - q[2]),
                    )
                })
                .collect();
            d.sort_by(|x, y| x.partial_cmp(y).unwrap());
            d[0] > 1e-3 && (d.len() < 2 || d[1] - d[0] > 1e-3)
        };
        !a.iter().all(|p| gap_ok(p, b)) || !b.iter().all(|q| gap_ok(q, a))
    }

    #[test]
    fn chamfer_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(6);
        let mut checked = 0;
        while checked < 10 {
            let a = random_points(&mut rng, 9, 2.0);
            let b = random_points(&mut rng, 7, 2.0);
            if has_near_tie(&a, &b) {
                continue;
            }
            checked += 1;
            let (_, ga, gb) = chamfer_with_grad(&a, &b).unwrap();
            for (i, k) in [(0usize, 0usize), (3, 1), (8, 2)] {
                let mut f = |x: f64| {
                    let mut a2 = a.clone();
                    a2[i][k] = x;
                    chamfer_distance(&a2, &b).unwrap()
                };
                assert_grad_close(ga[i][k], central_diff(&mut f, a[i][k], 1e-5));
            }
            for (j, k) in [(0usize, 2usize), (6, 0)] {
                let mut f = |x: f64| {
                    let mut b2 = b.clone();
                    b2[j][k] = x;
                    chamfer_distance(&a, &b2).unwrap()
                };
                assert_grad_close(gb[j][k], central_diff(&mut f, b[j][k], 1e-5));
            }
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(7);
        for _ in 0..10 {
            let mu: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let lv: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 1.0)).collect();
            let (_, gm, glv) = kl_loss_with_grad(&mu, &lv, 0.01);
            for d in 0..5 {
                let mut f = |x: f64| {
                    let mut m2 = mu.clone();
                    m2[d] = x;
                    kl_loss(&m2, &lv, 0.01)
                };
                assert_grad_close(gm[d], central_diff(&mut f, mu[d], 1e-5));
                let mut f = |x: f64| {
                    let mut l2 = lv.clone();
                    l2[d] = x;
                    kl_loss(&mu, &l2, 0.01)
                };
                assert_grad_close(glv[d], central_diff(&mut f, lv[d], 1e-5));
            }
        }
    }

    #[test]
    fn laplacian_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(8);
        let faces = [[0u32, 1, 2], [1, 2, 3], [2, 3, 4], [0, 2, 4]];
        let adj = build_adjacency(&faces, 5).unwrap();
        for _ in 0..10 {
            let verts = random_points(&mut rng, 5, 2.0);
            let (_, grad) = laplacian_frame_with_grad(&verts, &adj);
            for i in 0..5 {
                for k in 0..3 {
                    let mut f = |x: f64| {
                        let mut v2 = verts.clone();
                        v2[i][k] = x;
                        laplacian_frame(&v2, &adj)
                    };
                    assert_grad_close(grad[i][k], central_diff(&mut f, verts[i][k], 1e-5));
                }
            }
        }
    }
}
