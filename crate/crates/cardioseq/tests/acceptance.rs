//! Acceptance suite: every release-gating criterion, each printing one
//! pass/fail line (run with `--nocapture` to see them).
//!
//! Criteria 1-4 are fast, self-contained numerical suites. Criteria 5-9 share
//! one end-to-end run (dataset synthesis, 200-epoch training, evaluation,
//! deviation scoring, classification) and therefore live in a single test;
//! criterion 10 checks byte-level reproducibility on the same artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use cardioseq::analysis::{auc_of, classify_table, delta_table, subject_features};
use cardioseq::bundle::load_split;
use cardioseq::checkpoint;
use cardioseq::config::RunConfig;
use cardioseq::report::{generation_report, recon_report, write_gen_report, write_recon_report};
use cardioseq::synth::{synth_dataset, SplitFractions};
use cardioseq::train::{evaluate_loss, train};
use cardioseq_core::latent::{euclidean, LatentMode};
use cardioseq_core::losses::{
    chamfer_with_grad, kl_loss, kl_loss_with_grad, laplacian_frame_with_grad, laplacian_loss,
    reconstruction_loss,
};
use cardioseq_core::mesh::{build_adjacency, closed_surface_volume, ClinicalConditions};
use cardioseq_core::metrics::{assd, hausdorff, histogram_kl, wasserstein_1d};
use cardioseq_core::model::positional_encoding;
use cardioseq_core::phenotype::{extract_phenotypes, DEFAULT_MYO_DENSITY};
use cardioseq_core::rng::{derive_seed, Rng};
use cardioseq_core::shapes::{scale_vertices, unit_icosphere};
use cardioseq_core::stats::{spearman, welch_one_sided};
use cardioseq_core::toy::{DiseaseLabel, DiseaseMix};

fn check(criterion: &str, ok: bool, detail: &str) {
    if ok {
        eprintln!("[PASS] {criterion}: {detail}");
    } else {
        eprintln!("[FAIL] {criterion}: {detail}");
        panic!("criterion failed: {criterion} ({detail})");
    }
}

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

/// Rejects instances whose nearest-neighbor assignments could flip under the
/// finite-difference step.
fn has_near_tie(a: &[[f64; 3]], b: &[[f64; 3]]) -> bool {
    let gap_ok = |p: &[f64; 3], set: &[[f64; 3]]| -> bool {
        let mut d: Vec<f64> = set
            .iter()
            .map(|q| {
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
            })
            .collect();
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        d[0] > 1e-3 && (d.len() < 2 || d[1] - d[0] > 1e-3)
    };
    !a.iter().all(|p| gap_ok(p, b)) || !b.iter().all(|q| gap_ok(q, a))
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

#[test]
fn criterion_1_loss_gradient_suite() {
    let started = Instant::now();
    let mut rng = Rng::from_seed(101);
    let h = 1e-5f64;
    let mut worst = 0.0f64;

    // reconstruction term: mean per-frame Chamfer over T frames
    let mut instances = 0;
    while instances < 8 {
        let t_frames = 1 + (instances % 3);
        let recon: Vec<Vec<[f64; 3]>> = (0..t_frames)
            .map(|_| random_points(&mut rng, 5 + instances % 16, 2.0))
            .collect();
        let target: Vec<Vec<[f64; 3]>> = recon
            .iter()
            .map(|f| random_points(&mut rng, f.len().max(3), 2.0))
            .collect();
        if recon
            .iter()
            .zip(target.iter())
            .any(|(r, t)| has_near_tie(r, t))
        {
            continue;
        }
        instances += 1;
        for (ft, frame) in recon.iter().enumerate() {
            let (_, grad, _) = chamfer_with_grad(frame, &target[ft]).unwrap();
            for (i, k) in [(0usize, 0usize), (frame.len() - 1, 2)] {
                let analytic = grad[i][k] / t_frames as f64;
                let mut plus = recon.clone();
                plus[ft][i][k] += h;
                let mut minus = recon.clone();
                minus[ft][i][k] -= h;
                let numeric = (reconstruction_loss(&plus, &target).unwrap()
                    - reconstruction_loss(&minus, &target).unwrap())
                    / (2.0 * h);
                worst = worst.max(rel_err(analytic, numeric));
            }
        }
    }

    // KL term
    for _ in 0..8 {
        let mu: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let lv: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 1.0)).collect();
        let (_, gm, glv) = kl_loss_with_grad(&mu, &lv, 0.01);
        for d in 0..6 {
            let mut m = mu.clone();
            m[d] += h;
            let up = kl_loss(&m, &lv, 0.01);
            m[d] -= 2.0 * h;
            let down = kl_loss(&m, &lv, 0.01);
            worst = worst.max(rel_err(gm[d], (up - down) / (2.0 * h)));
            let mut l = lv.clone();
            l[d] += h;
            let up = kl_loss(&mu, &l, 0.01);
            l[d] -= 2.0 * h;
            let down = kl_loss(&mu, &l, 0.01);
            worst = worst.max(rel_err(glv[d], (up - down) / (2.0 * h)));
        }
    }

    // smoothing term over random triangulated patches (averaged over frames)
    let faces = [[0u32, 1, 2], [1, 2, 3], [2, 3, 4], [0, 2, 4], [1, 3, 4]];
    let adjacency = build_adjacency(&faces, 5).unwrap();
    for _ in 0..8 {
        let t_frames = 2usize;
        let frames: Vec<Vec<[f64; 3]>> = (0..t_frames)
            .map(|_| random_points(&mut rng, 5, 2.0))
            .collect();
        for (ft, frame) in frames.iter().enumerate() {
            let (_, grad) = laplacian_frame_with_grad(frame, &adjacency);
            for i in 0..5 {
                for k in 0..3 {
                    let analytic = grad[i][k] / t_frames as f64;
                    let mut plus = frames.clone();
                    plus[ft][i][k] += h;
                    let mut minus = frames.clone();
                    minus[ft][i][k] -= h;
                    let numeric = (laplacian_loss(&plus, &adjacency)
                        - laplacian_loss(&minus, &adjacency))
                        / (2.0 * h);
                    worst = worst.max(rel_err(analytic, numeric));
                }
            }
        }
    }

    let elapsed = started.elapsed();
    check(
        "criterion 1 (loss gradient suite)",
        worst <= 1e-4 && elapsed.as_secs() < 60,
        &format!("max relative error {worst:.3e} in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_metric_oracle_suite() {
    let started = Instant::now();
    let dist = |p: &[f64; 3], q: &[f64; 3]| -> f64 {
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let chamfer_oracle = |a: &[[f64; 3]], b: &[[f64; 3]]| -> f64 {
        let d1: f64 = a
            .iter()
            .map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum();
        let d2: f64 = b
            .iter()
            .map(|q| a.iter().map(|p| dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum();
        d1 / a.len() as f64 + d2 / b.len() as f64
    };
    let hausdorff_oracle = |a: &[[f64; 3]], b: &[[f64; 3]]| -> f64 {
        let directed = |x: &[[f64; 3]], y: &[[f64; 3]]| -> f64 {
            x.iter()
                .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        directed(a, b).max(directed(b, a))
    };
    let assd_oracle = |a: &[[f64; 3]], b: &[[f64; 3]]| -> f64 {
        let sum1: f64 = a
            .iter()
            .map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum();
        let sum2: f64 = b
            .iter()
            .map(|q| a.iter().map(|p| dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum();
        (sum1 + sum2) / (a.len() + b.len()) as f64
    };

    let mut rng = Rng::from_seed(202);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 1 + (rng.next_u64() % 50) as usize;
        let m = 1 + (rng.next_u64() % 50) as usize;
        let a = random_points(&mut rng, n, 10.0);
        let b = random_points(&mut rng, m, 10.0);
        let cham = chamfer_with_grad(&a, &b).unwrap().0;
        let hd = hausdorff(&a, &b).unwrap();
        let sd = assd(&a, &b).unwrap();
        worst = worst.max((cham - chamfer_oracle(&a, &b)).abs());
        worst = worst.max((hd - hausdorff_oracle(&a, &b)).abs());
        worst = worst.max((sd - assd_oracle(&a, &b)).abs());
        assert!(sd <= hd + 1e-15, "instance {i}: assd {sd} > hausdorff {hd}");
    }
    let elapsed = started.elapsed();
    check(
        "criterion 2 (metric oracle suite)",
        worst <= 1e-12 && elapsed.as_secs() < 60,
        &format!("200 instances, max |impl - oracle| {worst:.3e} in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_3_geometry_suite() {
    let started = Instant::now();
    let tetra_v = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    let tetra_f = [[0u32, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    let tetra = closed_surface_volume(&tetra_v, &tetra_f).unwrap();

    let cube_v = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let cube_f = [
        [0u32, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    let cube = closed_surface_volume(&cube_v, &cube_f).unwrap();

    let analytic = 4.0 / 3.0 * std::f64::consts::PI * 1000.0;
    let sphere_err = |level: usize| -> f64 {
        let (unit, faces) = unit_icosphere(level);
        let verts = scale_vertices(&unit, [10.0, 10.0, 10.0]);
        let vol = closed_surface_volume(&verts, &faces).unwrap();
        (vol - analytic).abs() / analytic
    };
    let err2 = sphere_err(2);
    let err3 = sphere_err(3);

    let elapsed = started.elapsed();
    check(
        "criterion 3 (geometry suite)",
        (tetra - 1.0 / 6.0).abs() <= 1e-12
            && (cube - 1.0).abs() <= 1e-12
            && err2 < 0.05
            && err3 < err2
            && elapsed.as_secs() < 60,
        &format!(
            "tetra {tetra:.15}, cube {cube:.15}, sphere rel err {err2:.4} -> {err3:.4} in {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_4_zero_identity_suite() {
    let started = Instant::now();
    let mut rng = Rng::from_seed(404);
    let pts = random_points(&mut rng, 30, 5.0);
    let cham = chamfer_with_grad(&pts, &pts).unwrap().0;
    let hd = hausdorff(&pts, &pts).unwrap();
    let sd = assd(&pts, &pts).unwrap();
    let samples: Vec<f64> = (0..50).map(|_| rng.uniform(-3.0, 3.0)).collect();
    let kl_hist = histogram_kl(&samples, &samples, 20).unwrap();
    let wd = wasserstein_1d(&samples, &samples).unwrap();
    let kl0 = kl_loss(&[0.0; 8], &[0.0; 8], 0.01);
    // forced-equality deviation harness: the norm equals the subject latent
    let z: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let delta = euclidean(&z, &z);
    let pe = positional_encoding(0, 64).unwrap();
    let pe_ok = pe
        .iter()
        .enumerate()
        .all(|(i, &v)| v == if i % 2 == 0 { 0.0 } else { 1.0 });

    let elapsed = started.elapsed();
    check(
        "criterion 4 (zero/identity suite)",
        cham == 0.0
            && hd == 0.0
            && sd == 0.0
            && kl_hist <= 1e-12
            && wd <= 1e-12
            && kl0 == 0.0
            && delta == 0.0
            && pe_ok
            && elapsed.as_secs() < 60,
        &format!(
            "chamfer {cham}, hd {hd}, assd {sd}, hist-kl {kl_hist:.1e}, wd {wd:.1e}, \
             kl(0,0) {kl0}, delta {delta}, pe(0) alternating in {elapsed:.2?}"
        ),
    );
}

/// Mean bounding-box diagonal (mm) over the subjects of a split.
fn mean_bbox_diagonal(dataset: &Path, split: &str) -> f64 {
    let subjects = load_split(dataset, split).unwrap();
    let mut total = 0.0;
    for (_, seq) in &subjects {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for frame in &seq.frames {
            for v in &frame.vertices {
                for k in 0..3 {
                    lo[k] = lo[k].min(v[k] as f64);
                    hi[k] = hi[k].max(v[k] as f64);
                }
            }
        }
        total += ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2))
            .sqrt();
    }
    total / subjects.len() as f64
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[test]
fn criteria_5_through_10_end_to_end() {
    // Stages are deterministic in their seeds, so when
    // CARDIOSEQ_ACCEPTANCE_DIR points at a directory, completed artifacts
    // (dataset, checkpoints) are reused across invocations; by default
    // everything runs fresh in a temporary directory.
    let (base, _guard) = match std::env::var_os("CARDIOSEQ_ACCEPTANCE_DIR") {
        Some(dir) => {
            let base = std::path::PathBuf::from(dir);
            fs::create_dir_all(&base).unwrap();
            (base, None)
        }
        None => {
            let tmp = tempfile::tempdir().unwrap();
            (tmp.path().to_path_buf(), Some(tmp))
        }
    };
    let data_dir = base.join("data");
    let train_dir = base.join("train");
    let seed = 20260808u64;

    // fixed full-scale toy configuration: V ~ 480, T = 20, 200 epochs
    let mut config = RunConfig::default();
    config.train.epochs = 200;
    config.train.seed = seed;

    if !data_dir.join("manifest.json").is_file() {
        eprintln!("synthesizing 64 train / 16 test healthy subjects...");
        synth_dataset(
            &data_dir,
            80,
            seed,
            &DiseaseMix {
                healthy: 1.0,
                low_ef: 0.0,
                thick_wall: 0.0,
            },
            &config.toy,
            &config.ranges,
            SplitFractions::parse("0.8,0.0,0.2").unwrap(),
            workers(),
        )
        .unwrap();
    }

    // untrained reference for the sanity separation of criterion 5b: plain
    // fan-in random initialization, without the mean-shape output init (a
    // mean-shape-initialized decoder already encodes the training data's
    // average anatomy and would trivially sit inside the bound)
    let mut config0 = config.clone();
    config0.train.epochs = 0;
    config0.train.init_output_to_mean_shape = false;
    let untrained_dir = base.join("untrained");
    if !untrained_dir.join("checkpoint-final/model.json").is_file() {
        train(&data_dir, &untrained_dir, &config0).unwrap();
    }
    let untrained_ckpt = checkpoint::load(&untrained_dir.join("checkpoint-final")).unwrap();

    if !train_dir.join("checkpoint-final/model.json").is_file() {
        eprintln!("training 200 epochs on 64 subjects (single worker)...");
        let started = Instant::now();
        train(&data_dir, &train_dir, &config).unwrap();
        eprintln!("training took {:.1?}", started.elapsed());
    }
    let ckpt = checkpoint::load(&train_dir.join("checkpoint-final")).unwrap();
    let log_path = train_dir.join("training_log.csv");

    // ---- criterion 5a: training reconstruction loss fell by >= 50% ----
    let log = fs::read_to_string(&log_path).unwrap();
    let train_recon: Vec<f64> = log
        .lines()
        .skip(1)
        .filter(|l| l.contains(",train,"))
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .collect();
    let first = train_recon[0];
    let last = *train_recon.last().unwrap();
    check(
        "criterion 5a (training loss decrease)",
        last <= 0.5 * first,
        &format!("epoch-0 reconstruction {first:.4} -> final {last:.4}"),
    );

    // ---- criterion 5b: held-out ASSD bound with sanity separation ----
    let diag = mean_bbox_diagonal(&data_dir, "test");
    let bound = 0.05 * diag;
    let trained_report = recon_report(&ckpt, &data_dir, "test", workers()).unwrap();
    let untrained_report = recon_report(&untrained_ckpt, &data_dir, "test", workers()).unwrap();
    let assd_of = |rows: &[cardioseq::report::ReconRow]| -> f64 {
        rows.iter()
            .find(|r| r.structure == "all" && r.aggregation == "all_frames")
            .unwrap()
            .assd_mean
    };
    let trained_assd = assd_of(&trained_report.rows);
    let untrained_assd = assd_of(&untrained_report.rows);
    check(
        "criterion 5b (held-out ASSD bound)",
        trained_assd <= bound && untrained_assd > bound,
        &format!(
            "trained {trained_assd:.3} mm <= {bound:.3} mm (5% of {diag:.1} mm diagonal), \
             untrained {untrained_assd:.3} mm exceeds it"
        ),
    );

    // ---- criterion 6: generation fidelity vs condition-shuffled control ----
    let eval_seed = derive_seed(seed, 60);
    let matched = generation_report(
        &ckpt,
        &data_dir,
        "all",
        &config.eval,
        eval_seed,
        false,
        workers(),
    )
    .unwrap();
    let shuffled = generation_report(
        &ckpt,
        &data_dir,
        "all",
        &config.eval,
        eval_seed,
        true,
        workers(),
    )
    .unwrap();
    let mut cells_won = 0;
    let mut detail = String::new();
    for phenotype in ["LVEDV", "LVEF"] {
        for covariate in ["sex", "age"] {
            let m = matched.cell(phenotype, covariate).unwrap();
            let s = shuffled.cell(phenotype, covariate).unwrap();
            let won = m.wd < s.wd && m.kl < s.kl;
            if won {
                cells_won += 1;
            }
            detail.push_str(&format!(
                "{phenotype}|{covariate}: wd {:.3} vs {:.3}, kl {:.3} vs {:.3}{} ",
                m.wd,
                s.wd,
                m.kl,
                s.kl,
                if won { " (won)" } else { "" }
            ));
        }
    }
    check(
        "criterion 6 (generation fidelity)",
        cells_won >= 3,
        &format!("{cells_won}/4 cells beat the shuffled control; {detail}"),
    );

    // ---- criterion 7: conditional monotonicity of height -> LVEDV ----
    let heights = [150.0, 160.0, 170.0, 180.0, 190.0];
    let mut mean_lvedv = Vec::new();
    for (i, &height) in heights.iter().enumerate() {
        let conditions = ClinicalConditions {
            age_years: 60.0,
            sex: 0,
            weight_kg: 70.0,
            height_cm: height,
        };
        let samples = ckpt
            .model
            .generate(&conditions, 20, derive_seed(seed, 70 + i as u64))
            .unwrap();
        let mut sum = 0.0;
        for frames in &samples {
            let seq = ckpt
                .model
                .tensors_to_sequence(frames, String::from("sweep"), conditions);
            sum += extract_phenotypes(&seq, DEFAULT_MYO_DENSITY).unwrap().lvedv;
        }
        mean_lvedv.push(sum / samples.len() as f64);
    }
    let rho = spearman(&heights, &mean_lvedv).unwrap();
    check(
        "criterion 7 (conditional monotonicity)",
        rho >= 0.8,
        &format!("LVEDV over height sweep {mean_lvedv:?}, Spearman rho {rho:.3}"),
    );

    // ---- criteria 8 and 9 share a fresh 100 + 100 cohort ----
    let cohort_dir = base.join("cohort");
    if !cohort_dir.join("manifest.json").is_file() {
        synth_dataset(
            &cohort_dir,
            200,
            derive_seed(seed, 80),
            &DiseaseMix {
                healthy: 0.5,
                low_ef: 0.5,
                thick_wall: 0.0,
            },
            &config.toy,
            &config.ranges,
            SplitFractions::parse("0.0,0.0,1.0").unwrap(),
            workers(),
        )
        .unwrap();
    }
    let cohort = load_split(&cohort_dir, "test").unwrap();

    eprintln!("scoring latent deviations for 200 subjects ({} synthetic each)...", config.eval.n_synth);
    let started = Instant::now();
    let deltas = delta_table(
        &ckpt,
        &cohort_dir,
        "test",
        config.eval.n_synth,
        derive_seed(seed, 81),
        LatentMode::FrameMean,
        workers(),
    )
    .unwrap();
    eprintln!("deviation scoring took {:.1?}", started.elapsed());
    let mut low_ef = Vec::new();
    let mut healthy = Vec::new();
    for (row, (record, _)) in deltas.iter().zip(cohort.iter()) {
        match record.disease_label {
            DiseaseLabel::LowEf => low_ef.push(row.delta_z),
            DiseaseLabel::Healthy => healthy.push(row.delta_z),
            DiseaseLabel::ThickWall => {}
        }
    }
    let (t, df, p) = welch_one_sided(&low_ef, &healthy).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    check(
        "criterion 8 (latent-delta discrimination)",
        p < 0.01,
        &format!(
            "mean delta lowEF {:.3} vs healthy {:.3} (n {} / {}), Welch t {t:.2}, df {df:.0}, p {p:.3e}",
            mean(&low_ef),
            mean(&healthy),
            low_ef.len(),
            healthy.len()
        ),
    );

    // ---- criterion 9: classification harness orderings ----
    let features = subject_features(
        &ckpt,
        &cohort_dir,
        "test",
        LatentMode::FrameMean,
        workers(),
    )
    .unwrap();
    let rows = classify_table(
        &features,
        DiseaseLabel::LowEf,
        DiseaseLabel::Healthy,
        5,
        derive_seed(seed, 82),
    )
    .unwrap();
    let mut all_ok = true;
    let mut detail = String::new();
    for classifier in ["adaboost", "lda", "svm"] {
        let conf = auc_of(&rows, classifier, "confounders").unwrap();
        let ph = auc_of(&rows, classifier, "phenotypes+confounders").unwrap();
        let lat = auc_of(&rows, classifier, "latent+confounders").unwrap();
        let combined = auc_of(&rows, classifier, "phenotypes+latent+confounders").unwrap();
        let ok = lat >= conf && combined >= ph.max(lat) - 0.02;
        all_ok &= ok;
        detail.push_str(&format!(
            "{classifier}: conf {conf:.3} ph {ph:.3} lat {lat:.3} combined {combined:.3}{} ",
            if ok { "" } else { " (violated)" }
        ));
    }
    check("criterion 9 (classification harness)", all_ok, &detail);

    // ---- criterion 10: reproducibility ----
    // identical evaluation reports across repeated runs (including parallel)
    let report_a = recon_report(&ckpt, &data_dir, "test", 1).unwrap();
    let bytes_a = serde_json::to_vec(&report_a.rows).unwrap();
    let report_b = recon_report(&ckpt, &data_dir, "test", workers()).unwrap();
    let bytes_b = serde_json::to_vec(&report_b.rows).unwrap();
    let gen_a = generation_report(&ckpt, &data_dir, "all", &config.eval, eval_seed, false, 1)
        .unwrap();
    let gen_same = serde_json::to_vec(&gen_a.rows).unwrap()
        == serde_json::to_vec(&matched.rows).unwrap();

    // checkpoint round-trip preserves the evaluation loss to 1e-6
    let before = evaluate_loss(&ckpt, &data_dir, "test").unwrap();
    let resaved_dir = base.join("resaved");
    checkpoint::save(
        &resaved_dir,
        &ckpt.model,
        &ckpt.meta.loss,
        &ckpt.meta.optimizer,
        ckpt.meta.train_seed,
        ckpt.meta.epochs_trained,
        ckpt.meta.latent_mode,
    )
    .unwrap();
    let resaved = checkpoint::load(&resaved_dir).unwrap();
    let after = evaluate_loss(&resaved, &data_dir, "test").unwrap();

    // report files themselves are byte-stable
    let out_a = base.join("report-a");
    let out_b = base.join("report-b");
    write_recon_report(&report_a, &out_a).unwrap();
    write_recon_report(&report_b, &out_b).unwrap();
    write_gen_report(&matched, &out_a).unwrap();
    write_gen_report(&gen_a, &out_b).unwrap();
    let file_same = fs::read(out_a.join("recon_table.csv")).unwrap()
        == fs::read(out_b.join("recon_table.csv")).unwrap()
        && fs::read(out_a.join("gen_table.csv")).unwrap()
            == fs::read(out_b.join("gen_table.csv")).unwrap();

    check(
        "criterion 10 (reproducibility)",
        bytes_a == bytes_b
            && gen_same
            && file_same
            && (before.total - after.total).abs() <= 1e-6,
        &format!(
            "eval reports byte-identical across runs/workers; round-trip loss {} -> {}",
            before.total, after.total
        ),
    );
}
