//! Latent-space analysis over datasets: latent-vector tables, deviation
//! scores against the personalised synthetic norm, latent-phenotype
//! correlations, and the disease-classification harness.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cardioseq_core::classify::{cross_validated_auc, ClassifierKind, CvResult};
use cardioseq_core::latent::{latent_delta, latent_vector, LatentMode};
use cardioseq_core::phenotype::{extract_phenotypes, DEFAULT_MYO_DENSITY, PHENOTYPE_NAMES};
use cardioseq_core::rng::derive_seed;
use cardioseq_core::stats::pearson_matrix;
use cardioseq_core::toy::DiseaseLabel;

use crate::bundle::load_split;
use crate::checkpoint::Checkpoint;
use crate::parallel::run_parallel;

/// Per-subject feature rows shared by the analysis commands.
pub struct SubjectFeatures {
    pub ids: Vec<String>,
    pub labels: Vec<DiseaseLabel>,
    pub latents: Vec<Vec<f64>>,
    pub phenotypes: Vec<Vec<f64>>,
    pub confounders: Vec<Vec<f64>>,
}

/// Extracts latent vectors, phenotypes, and raw confounders for a split.
pub fn subject_features(
    checkpoint: &Checkpoint,
    dataset_dir: &Path,
    split: &str,
    mode: LatentMode,
    workers: usize,
) -> Result<SubjectFeatures> {
    let subjects = load_split(dataset_dir, split)?;
    let rows = run_parallel(&subjects, workers, |_, (record, seq)| {
        let z = latent_vector(&checkpoint.model, seq, mode)?;
        let p = extract_phenotypes(seq, DEFAULT_MYO_DENSITY)?;
        let c = record.conditions;
        Ok((
            seq.subject_id.clone(),
            record.disease_label,
            z,
            p.values().to_vec(),
            vec![c.age_years, c.sex as f64, c.weight_kg, c.height_cm],
        ))
    })?;
    let mut out = SubjectFeatures {
        ids: Vec::with_capacity(rows.len()),
        labels: Vec::with_capacity(rows.len()),
        latents: Vec::with_capacity(rows.len()),
        phenotypes: Vec::with_capacity(rows.len()),
        confounders: Vec::with_capacity(rows.len()),
    };
    for (id, label, z, p, c) in rows {
        out.ids.push(id);
        out.labels.push(label);
        out.latents.push(z);
        out.phenotypes.push(p);
        out.confounders.push(c);
    }
    Ok(out)
}

/// Writes `latents.csv` (one row per subject) and, when asked, the
/// latent-phenotype Pearson correlation matrix.
pub fn write_latent_table(
    features: &SubjectFeatures,
    d_latent: usize,
    out_dir: &Path,
    with_correlations: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("subject_id,source");
    for d in 0..d_latent {
        csv.push_str(&format!(",z{d}"));
    }
    csv.push('\n');
    for (id, z) in features.ids.iter().zip(features.latents.iter()) {
        csv.push_str(id);
        csv.push_str(",real");
        for v in z {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("latents.csv"), csv)?;

    if with_correlations {
        let matrix = pearson_matrix(&features.latents, &features.phenotypes)?;
        let mut csv = String::from("latent_dim");
        for name in PHENOTYPE_NAMES {
            csv.push_str(&format!(",{name}"));
        }
        csv.push('\n');
        for (d, row) in matrix.iter().enumerate() {
            csv.push_str(&format!("z{d}"));
            for entry in row {
                match entry {
                    Some(r) => csv.push_str(&format!(",{r}")),
                    None => csv.push_str(",NA"),
                }
            }
            csv.push('\n');
        }
        fs::write(out_dir.join("latent_phenotype_correlations.csv"), csv)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaRow {
    pub subject_id: String,
    pub delta_z: f64,
    pub n_synth: usize,
    pub seed: u64,
}

/// Deviation score of every subject in a split; per-subject seeds derive
/// from `seed` and the subject index.
pub fn delta_table(
    checkpoint: &Checkpoint,
    dataset_dir: &Path,
    split: &str,
    n_synth: usize,
    seed: u64,
    mode: LatentMode,
    workers: usize,
) -> Result<Vec<DeltaRow>> {
    let subjects = load_split(dataset_dir, split)?;
    run_parallel(&subjects, workers, |i, (record, seq)| {
        let subject_seed = derive_seed(seed, i as u64);
        let score = latent_delta(
            &checkpoint.model,
            seq,
            &record.conditions,
            n_synth,
            subject_seed,
            mode,
        )?;
        Ok(DeltaRow {
            subject_id: seq.subject_id.clone(),
            delta_z: score.delta_z,
            n_synth: score.n_synth,
            seed: subject_seed,
        })
    })
}

pub fn write_delta_table(rows: &[DeltaRow], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("subject_id,delta_z,n_synth,seed\n");
    for r in rows {
        csv.push_str(&format!("{},{},{},{}\n", r.subject_id, r.delta_z, r.n_synth, r.seed));
    }
    fs::write(out_dir.join("delta_scores.csv"), csv)?;
    Ok(())
}

/// The evaluated feature sets, in reporting order.
pub const FEATURE_SETS: [&str; 4] = [
    "confounders",
    "phenotypes+confounders",
    "latent+confounders",
    "phenotypes+latent+confounders",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyRow {
    pub classifier: String,
    pub feature_set: String,
    pub auc_mean: f64,
    pub auc_sd: f64,
    pub folds: usize,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Builds one feature table by concatenating the named blocks.
fn assemble(features: &SubjectFeatures, keep: &[usize], set: &str) -> Vec<Vec<f64>> {
    keep.iter()
        .map(|&i| {
            let mut row = Vec::new();
            if set.contains("phenotypes") {
                row.extend_from_slice(&features.phenotypes[i]);
            }
            if set.contains("latent") {
                row.extend_from_slice(&features.latents[i]);
            }
            row.extend_from_slice(&features.confounders[i]);
            row
        })
        .collect()
}

/// Cross-validated AUC of every classifier on every feature set for a binary
/// disease-label task.
pub fn classify_table(
    features: &SubjectFeatures,
    positive: DiseaseLabel,
    negative: DiseaseLabel,
    folds: usize,
    seed: u64,
) -> Result<Vec<ClassifyRow>> {
    let keep: Vec<usize> = features
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == positive || l == negative)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        bail!(
            "no subjects with labels {} or {}",
            positive.as_str(),
            negative.as_str()
        );
    }
    let labels: Vec<bool> = keep.iter().map(|&i| features.labels[i] == positive).collect();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;

    let mut rows = Vec::new();
    for kind in ClassifierKind::ALL {
        for set in FEATURE_SETS {
            let table = assemble(features, &keep, set);
            let result: CvResult = cross_validated_auc(&table, &labels, kind, folds, seed)
                .with_context(|| format!("{} on `{set}`", kind.as_str()))?;
            rows.push(ClassifyRow {
                classifier: kind.as_str().to_string(),
                feature_set: set.to_string(),
                auc_mean: result.mean_auc,
                auc_sd: result.sd_auc,
                folds,
                n_positive: n_pos,
                n_negative: n_neg,
            });
        }
    }
    Ok(rows)
}

pub fn write_classify_table(rows: &[ClassifyRow], seed: u64, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv =
        String::from("classifier,feature_set,auc_mean,auc_sd,folds,n_positive,n_negative,seed\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{seed}\n",
            r.classifier, r.feature_set, r.auc_mean, r.auc_sd, r.folds, r.n_positive, r.n_negative
        ));
    }
    fs::write(out_dir.join("classification_auc.csv"), csv)?;
    Ok(())
}

/// Lookup helper used by callers asserting orderings between feature sets.
pub fn auc_of(rows: &[ClassifyRow], classifier: &str, feature_set: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.classifier == classifier && r.feature_set == feature_set)
        .map(|r| r.auc_mean)
}

/// Writes the full per-subject feature table backing the classification run.
pub fn write_feature_table(features: &SubjectFeatures, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let d_latent = features.latents.first().map(|z| z.len()).unwrap_or(0);
    let mut csv = String::from("subject_id,disease_label");
    for name in PHENOTYPE_NAMES {
        csv.push_str(&format!(",{name}"));
    }
    csv.push_str(",age,sex,weight,height");
    for d in 0..d_latent {
        csv.push_str(&format!(",z{d}"));
    }
    csv.push('\n');
    for i in 0..features.ids.len() {
        csv.push_str(&format!("{},{}", features.ids[i], features.labels[i].as_str()));
        for v in &features.phenotypes[i] {
            csv.push_str(&format!(",{v}"));
        }
        for v in &features.confounders[i] {
            csv.push_str(&format!(",{v}"));
        }
        for v in &features.latents[i] {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("features.csv"), csv)?;
    Ok(())
}
