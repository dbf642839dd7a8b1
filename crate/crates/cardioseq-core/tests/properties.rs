//! Property tests over randomized inputs for the geometry kernels, losses,
//! and distribution metrics.

use proptest::prelude::*;

use cardioseq_core::losses::{chamfer_distance, kl_loss};
use cardioseq_core::mesh::{build_adjacency, closed_surface_volume};
use cardioseq_core::metrics::{assd, hausdorff, histogram_kl, wasserstein_1d};
use cardioseq_core::shapes::unit_icosphere;

fn faces_strategy() -> impl Strategy<Value = (Vec<[u32; 3]>, usize)> {
    // random triangle soups over up to 24 vertices, built constructively so
    // the three indices of a face are always pairwise distinct
    (3usize..24).prop_flat_map(|v| {
        let face = (0..v, 1..v, 1..v - 1).prop_map(move |(a, d1, d2raw)| {
            let d2 = if d2raw >= d1 { d2raw + 1 } else { d2raw };
            [a as u32, ((a + d1) % v) as u32, ((a + d2) % v) as u32]
        });
        (proptest::collection::vec(face, 0..40), Just(v))
    })
}

fn points_strategy(max_n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec(
        (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0).prop_map(|(x, y, z)| [x, y, z]),
        1..max_n,
    )
}

proptest! {
    #[test]
    fn adjacency_symmetric_no_self_loops((faces, v) in faces_strategy()) {
        let adj = build_adjacency(&faces, v).unwrap();
        for (i, list) in adj.iter().enumerate() {
            prop_assert!(list.windows(2).all(|w| w[0] < w[1]), "unsorted or duplicated");
            for &j in list {
                prop_assert_ne!(j as usize, i, "self loop at {}", i);
                prop_assert!(adj[j as usize].contains(&(i as u32)), "asymmetric {}-{}", i, j);
            }
        }
    }

    #[test]
    fn volume_translation_and_scale(
        offset in (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3),
        scale in 0.1f64..10.0,
    ) {
        let (v, f) = unit_icosphere(1);
        let base = closed_surface_volume(&v, &f).unwrap();
        let moved: Vec<[f64; 3]> = v
            .iter()
            .map(|p| [p[0] + offset.0, p[1] + offset.1, p[2] + offset.2])
            .collect();
        let vol = closed_surface_volume(&moved, &f).unwrap();
        prop_assert!((vol - base).abs() <= 1e-9 * base.abs());

        let scaled: Vec<[f64; 3]> = v.iter().map(|p| [p[0] * scale, p[1] * scale, p[2] * scale]).collect();
        let vol = closed_surface_volume(&scaled, &f).unwrap();
        let expect = scale * scale * scale * base;
        prop_assert!((vol - expect).abs() <= 1e-9 * expect.abs());

        let flipped: Vec<[u32; 3]> = f.iter().map(|t| [t[0], t[2], t[1]]).collect();
        let neg = closed_surface_volume(&v, &flipped).unwrap();
        prop_assert!((neg + base).abs() <= 1e-12);
    }

    #[test]
    fn chamfer_and_surface_metrics_properties(
        a in points_strategy(24),
        b in points_strategy(24),
        t in (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0),
    ) {
        let shift = |s: &[[f64; 3]]| -> Vec<[f64; 3]> {
            s.iter().map(|p| [p[0] + t.0, p[1] + t.1, p[2] + t.2]).collect()
        };
        let cham = chamfer_distance(&a, &b).unwrap();
        prop_assert_eq!(cham, chamfer_distance(&b, &a).unwrap());
        prop_assert!((cham - chamfer_distance(&shift(&a), &shift(&b)).unwrap()).abs() <= 1e-9);
        prop_assert!(cham >= 0.0);

        let hd = hausdorff(&a, &b).unwrap();
        let sd = assd(&a, &b).unwrap();
        prop_assert!(sd <= hd + 1e-15, "assd {} > hausdorff {}", sd, hd);
        prop_assert_eq!(hd, hausdorff(&b, &a).unwrap());
        prop_assert_eq!(sd, assd(&b, &a).unwrap());
    }

    #[test]
    fn kl_loss_nonnegative(
        mu in proptest::collection::vec(-5.0f64..5.0, 1..16),
        spread in proptest::collection::vec(-6.0f64..4.0, 1..16),
        beta in 0.0f64..2.0,
    ) {
        let n = mu.len().min(spread.len());
        prop_assert!(kl_loss(&mu[..n], &spread[..n], beta) >= 0.0);
    }

    #[test]
    fn histogram_kl_nonnegative_and_zero_on_self(
        p in proptest::collection::vec(-50.0f64..50.0, 1..60),
        q in proptest::collection::vec(-50.0f64..50.0, 1..60),
    ) {
        prop_assert!(histogram_kl(&p, &q, 20).unwrap() >= 0.0);
        prop_assert!(histogram_kl(&p, &p, 20).unwrap() <= 1e-12);
    }

    #[test]
    fn wasserstein_triangle_inequality(
        a in proptest::collection::vec(-20.0f64..20.0, 1..30),
        b in proptest::collection::vec(-20.0f64..20.0, 1..30),
        c in proptest::collection::vec(-20.0f64..20.0, 1..30),
    ) {
        let ab = wasserstein_1d(&a, &b).unwrap();
        let bc = wasserstein_1d(&b, &c).unwrap();
        let ac = wasserstein_1d(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9, "{} > {} + {}", ac, ab, bc);
        prop_assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
    }
}
