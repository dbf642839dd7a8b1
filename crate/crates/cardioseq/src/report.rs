//! Evaluation reports: reconstruction accuracy (Hausdorff / average symmetric
//! surface distance, broken down by structure, frame aggregation, and
//! end-diastole/end-systole) and generation fidelity (histogram KL divergence
//! and Wasserstein distance of phenotype distributions against covariates).

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cardioseq_core::mesh::{label, MeshSequence};
use cardioseq_core::metrics::{assd, hausdorff, histogram_kl, wasserstein_1d};
use cardioseq_core::phenotype::{
    ed_es_frames, extract_phenotypes, structure_volumes, PhenotypeSet, DEFAULT_MYO_DENSITY,
    PHENOTYPE_NAMES,
};
use cardioseq_core::rng::{derive_seed, Rng};
use cardioseq_core::tensor::Tensor;
use cardioseq_core::toy::SubjectRecord;

use crate::bundle::load_split;
use crate::checkpoint::Checkpoint;
use crate::config::EvalSettings;
use crate::parallel::run_parallel;

pub const STRUCTURES: [&str; 4] = ["LV", "Myo", "RV", "all"];
pub const AGGREGATIONS: [&str; 3] = ["all_frames", "ED", "ES"];

/// Full-scale reference values reported for a real clinical cohort; recorded
/// as context only, never asserted against (toy data cannot reproduce them).
pub const FULL_SCALE_REFERENCE_HD_MM: f64 = 4.163;
pub const FULL_SCALE_REFERENCE_ASSD_MM: f64 = 1.934;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconRow {
    pub structure: String,
    pub aggregation: String,
    pub hd_mean: f64,
    pub hd_sd: f64,
    pub assd_mean: f64,
    pub assd_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconReport {
    pub rows: Vec<ReconRow>,
    pub metadata: ReconMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconMetadata {
    pub checkpoint: String,
    pub dataset: String,
    pub split: String,
    pub n_subjects: usize,
    /// Distances are computed vertex-to-vertex on label-filtered sets.
    pub metric_basis: String,
    /// ED/ES frames come from the ground-truth LV volume curve.
    pub ed_es_source: String,
    pub full_scale_reference_hd_mm: f64,
    pub full_scale_reference_assd_mm: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Label-filtered vertex sets of one frame pair as f64 point clouds.
fn structure_points(seq_frame: &[[f64; 3]], indices: &[usize]) -> Vec<[f64; 3]> {
    indices.iter().map(|&i| seq_frame[i]).collect()
}

/// Per-subject HD/ASSD aggregated per structure: (all-frame mean, ED, ES).
struct SubjectRecon {
    /// `[structure][aggregation] -> (hd, assd)`.
    table: [[(f64, f64); 3]; 3],
}

fn subject_recon(seq: &MeshSequence, recon: &[Tensor]) -> Result<SubjectRecon> {
    let lv_volumes = structure_volumes(seq, label::LV)?;
    let (ed, es) = ed_es_frames(&lv_volumes);
    let label_indices: Vec<Vec<usize>> = label::ALL
        .iter()
        .map(|&l| seq.frames[0].structure_vertex_indices(l))
        .collect();
    let mut table = [[(0.0, 0.0); 3]; 3];
    for (si, indices) in label_indices.iter().enumerate() {
        let mut hd_frames = Vec::with_capacity(seq.frames.len());
        let mut assd_frames = Vec::with_capacity(seq.frames.len());
        for (frame, recon_frame) in seq.frames.iter().zip(recon.iter()) {
            let target = frame.vertices_f64();
            let predicted = recon_frame.to_points_f64();
            let a = structure_points(&target, indices);
            let b = structure_points(&predicted, indices);
            hd_frames.push(hausdorff(&a, &b)?);
            assd_frames.push(assd(&a, &b)?);
        }
        let n = hd_frames.len() as f64;
        table[si][0] = (
            hd_frames.iter().sum::<f64>() / n,
            assd_frames.iter().sum::<f64>() / n,
        );
        table[si][1] = (hd_frames[ed], assd_frames[ed]);
        table[si][2] = (hd_frames[es], assd_frames[es]);
    }
    Ok(SubjectRecon { table })
}

/// Reconstruction-accuracy rows with an injectable reconstruction source, so
/// identity harnesses can validate the aggregation in isolation.
pub fn recon_rows<F>(
    subjects: &[(SubjectRecord, MeshSequence)],
    recon_of: F,
    workers: usize,
) -> Result<Vec<ReconRow>>
where
    F: Fn(&MeshSequence) -> Result<Vec<Tensor>> + Sync,
{
    let per_subject: Vec<SubjectRecon> = run_parallel(subjects, workers, |_, (_, seq)| {
        let recon = recon_of(seq)?;
        subject_recon(seq, &recon)
    })?;

    let mut rows = Vec::new();
    for (si, structure) in STRUCTURES.iter().enumerate() {
        for (ai, aggregation) in AGGREGATIONS.iter().enumerate() {
            let collect = |pick: &dyn Fn(&SubjectRecon) -> (f64, f64)| -> (Vec<f64>, Vec<f64>) {
                let pairs: Vec<(f64, f64)> = per_subject.iter().map(pick).collect();
                (
                    pairs.iter().map(|p| p.0).collect(),
                    pairs.iter().map(|p| p.1).collect(),
                )
            };
            let (hd_values, assd_values) = if si < 3 {
                collect(&|s: &SubjectRecon| s.table[si][ai])
            } else {
                // "all": mean over the three structures per subject
                collect(&|s: &SubjectRecon| {
                    let hd = (s.table[0][ai].0 + s.table[1][ai].0 + s.table[2][ai].0) / 3.0;
                    let sd = (s.table[0][ai].1 + s.table[1][ai].1 + s.table[2][ai].1) / 3.0;
                    (hd, sd)
                })
            };
            let (hd_mean, hd_sd) = mean_sd(&hd_values);
            let (assd_mean, assd_sd) = mean_sd(&assd_values);
            rows.push(ReconRow {
                structure: structure.to_string(),
                aggregation: aggregation.to_string(),
                hd_mean,
                hd_sd,
                assd_mean,
                assd_sd,
            });
        }
    }
    Ok(rows)
}

/// Reconstruction-accuracy table over one dataset split.
pub fn recon_report(
    checkpoint: &Checkpoint,
    dataset_dir: &Path,
    split: &str,
    workers: usize,
) -> Result<ReconReport> {
    let subjects = load_split(dataset_dir, split)?;
    let rows = recon_rows(
        &subjects,
        |seq| {
            let (recon, _) = checkpoint.model.reconstruct(seq)?;
            Ok(recon)
        },
        workers,
    )?;
    Ok(ReconReport {
        rows,
        metadata: ReconMetadata {
            checkpoint: checkpoint.path.display().to_string(),
            dataset: dataset_dir.display().to_string(),
            split: split.to_string(),
            n_subjects: subjects.len(),
            metric_basis: "vertex_to_vertex".to_string(),
            ed_es_source: "ground_truth_lv_volume".to_string(),
            full_scale_reference_hd_mm: FULL_SCALE_REFERENCE_HD_MM,
            full_scale_reference_assd_mm: FULL_SCALE_REFERENCE_ASSD_MM,
        },
    })
}

pub fn write_recon_report(report: &ReconReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("structure,aggregation,hd_mean,hd_sd,assd_mean,assd_sd\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.structure, r.aggregation, r.hd_mean, r.hd_sd, r.assd_mean, r.assd_sd
        ));
    }
    fs::write(out_dir.join("recon_table.csv"), csv)?;
    fs::write(
        out_dir.join("recon_report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

// ---- generation fidelity ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenRow {
    pub phenotype: String,
    pub covariate: String,
    pub kl: f64,
    pub wd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenReport {
    pub rows: Vec<GenRow>,
    pub metadata: GenMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenMetadata {
    pub checkpoint: String,
    pub dataset: String,
    pub split: String,
    pub n_subjects: usize,
    pub samples_per_subject: usize,
    pub seed: u64,
    pub kl_bins: usize,
    /// Direction of the divergence: deviation of the generator where real
    /// mass exists.
    pub kl_direction: String,
    pub age_bin_edges: Vec<f64>,
    /// Age bins dropped for holding fewer than two real subjects.
    pub dropped_age_bins: Vec<usize>,
    /// True when the control permutation detached synthetic pools from their
    /// subjects' covariates.
    pub shuffled_conditions: bool,
}

/// Phenotypes of every generated sample for one subject.
fn synthetic_phenotypes(
    checkpoint: &Checkpoint,
    record: &SubjectRecord,
    samples: usize,
    seed: u64,
) -> Result<Vec<PhenotypeSet>> {
    let sequences = checkpoint
        .model
        .generate(&record.conditions, samples, seed)?;
    sequences
        .iter()
        .map(|frames| {
            let seq = checkpoint.model.tensors_to_sequence(
                frames,
                String::from("synthetic"),
                record.conditions,
            );
            extract_phenotypes(&seq, DEFAULT_MYO_DENSITY)
                .context("degenerate synthetic geometry")
        })
        .collect()
}

/// Interior quantile edges over sorted samples.
fn quantile_edges(mut values: Vec<f64>, bins: usize) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (1..bins)
        .map(|k| {
            let q = k as f64 / bins as f64;
            let pos = q * (values.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            values[lo] * (1.0 - frac) + values[hi] * frac
        })
        .collect()
}

fn age_bin(edges: &[f64], age: f64) -> usize {
    edges.iter().filter(|&&e| age > e).count()
}

/// Distribution-fidelity table over one dataset split.
///
/// For every real subject, `samples_per_subject` sequences are generated
/// under its covariates (or, for the shuffled control, grouped under a
/// seeded permutation of the covariates). Within each covariate group the
/// real and synthetic phenotype samples are compared by histogram KL
/// divergence and Wasserstein distance; groups are combined by their real
/// subject counts.
pub fn generation_report(
    checkpoint: &Checkpoint,
    dataset_dir: &Path,
    split: &str,
    eval: &EvalSettings,
    seed: u64,
    shuffle_conditions: bool,
    workers: usize,
) -> Result<GenReport> {
    let subjects = load_split(dataset_dir, split)?;
    let n = subjects.len();
    if n < 2 {
        bail!("generation report needs at least 2 subjects, split `{split}` has {n}");
    }
    let real: Vec<PhenotypeSet> = subjects
        .iter()
        .map(|(_, seq)| extract_phenotypes(seq, DEFAULT_MYO_DENSITY).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let samples = eval.samples_per_subject;
    let synth: Vec<Vec<PhenotypeSet>> = run_parallel(&subjects, workers, |i, (record, _)| {
        synthetic_phenotypes(checkpoint, record, samples, derive_seed(seed, i as u64))
    })?;

    // pool assignment: which subject's covariates label each synthetic pool
    let assignment: Vec<usize> = if shuffle_conditions {
        Rng::from_seed(derive_seed(seed, u64::MAX)).permutation(n)
    } else {
        (0..n).collect()
    };

    let ages: Vec<f64> = subjects.iter().map(|(r, _)| r.conditions.age_years).collect();
    let age_edges = quantile_edges(ages.clone(), eval.age_bins);

    // group memberships by covariate value
    let sex_group = |i: usize| subjects[i].0.conditions.sex as usize;
    let age_group = |i: usize| age_bin(&age_edges, ages[i]);

    let mut dropped_age_bins: Vec<usize> = Vec::new();
    let mut rows = Vec::new();
    for (pi, phenotype) in PHENOTYPE_NAMES.iter().enumerate() {
        for covariate in ["age", "sex"] {
            let n_groups = if covariate == "sex" { 2 } else { eval.age_bins };
            let group_of: &dyn Fn(usize) -> usize = if covariate == "sex" {
                &sex_group
            } else {
                &age_group
            };
            let mut weighted_kl = 0.0;
            let mut weighted_wd = 0.0;
            let mut total_weight = 0usize;
            for g in 0..n_groups {
                let real_pool: Vec<f64> = (0..n)
                    .filter(|&i| group_of(i) == g)
                    .map(|i| real[i].values()[pi])
                    .collect();
                if real_pool.len() < 2 {
                    if covariate == "age" && pi == 0 && !dropped_age_bins.contains(&g) {
                        dropped_age_bins.push(g);
                        eprintln!(
                            "generation report: dropping age bin {g} with {} real subject(s)",
                            real_pool.len()
                        );
                    }
                    continue;
                }
                // synthetic pool grouped by the assigned subject's covariates
                let synth_pool: Vec<f64> = (0..n)
                    .filter(|&i| group_of(assignment[i]) == g)
                    .flat_map(|i| synth[i].iter().map(move |p| p.values()[pi]))
                    .collect();
                if synth_pool.is_empty() {
                    continue;
                }
                let kl = histogram_kl(&real_pool, &synth_pool, eval.kl_bins)?;
                let wd = wasserstein_1d(&real_pool, &synth_pool)?;
                weighted_kl += kl * real_pool.len() as f64;
                weighted_wd += wd * real_pool.len() as f64;
                total_weight += real_pool.len();
            }
            if total_weight == 0 {
                bail!("no covariate group of `{covariate}` has >= 2 real subjects");
            }
            rows.push(GenRow {
                phenotype: phenotype.to_string(),
                covariate: covariate.to_string(),
                kl: weighted_kl / total_weight as f64,
                wd: weighted_wd / total_weight as f64,
            });
        }
    }
    Ok(GenReport {
        rows,
        metadata: GenMetadata {
            checkpoint: checkpoint.path.display().to_string(),
            dataset: dataset_dir.display().to_string(),
            split: split.to_string(),
            n_subjects: n,
            samples_per_subject: samples,
            seed,
            kl_bins: eval.kl_bins,
            kl_direction: "real||synthetic".to_string(),
            age_bin_edges: age_edges,
            dropped_age_bins,
            shuffled_conditions: shuffle_conditions,
        },
    })
}

pub fn write_gen_report(report: &GenReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("phenotype,covariate,kl,wd\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.phenotype, r.covariate, r.kl, r.wd
        ));
    }
    let stem = if report.metadata.shuffled_conditions {
        "gen_table_shuffled"
    } else {
        "gen_table"
    };
    fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
    fs::write(
        out_dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

impl GenReport {
    pub fn cell(&self, phenotype: &str, covariate: &str) -> Option<&GenRow> {
        self.rows
            .iter()
            .find(|r| r.phenotype == phenotype && r.covariate == covariate)
    }
}
