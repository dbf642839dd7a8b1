//! Command-line interface: one binary with subcommands wiring the dataset
//! generator, trainer, evaluators, and latent-analysis tools into
//! reproducible pipelines. Every run writes its fully resolved configuration
//! next to its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cardioseq_core::mesh::ClinicalConditions;
use cardioseq_core::toy::{DiseaseLabel, DiseaseMix, SubjectRecord};

use crate::analysis;
use crate::bundle::{read_bundle, write_bundle, Manifest, ManifestEntry};
use crate::checkpoint;
use crate::config::RunConfig;
use crate::report;
use crate::synth::{synth_dataset, SplitFractions};
use crate::train;

/// Environment variable providing the default dataset root for `--data`.
pub const DATA_ROOT_ENV: &str = "CARDIOSEQ_DATA_ROOT";

#[derive(Parser)]
#[command(
    name = "cardioseq",
    about = "Conditional generative modeling of beating-heart surface mesh sequences",
    version
)]
pub struct Cli {
    /// Configuration file (JSON); omitted fields take documented defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct DataArg {
    /// Dataset directory (defaults to $CARDIOSEQ_DATA_ROOT).
    #[arg(long)]
    data: Option<PathBuf>,
}

impl DataArg {
    fn resolve(&self) -> Result<PathBuf> {
        if let Some(p) = &self.data {
            return Ok(p.clone());
        }
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => Ok(PathBuf::from(root)),
            None => bail!("no --data given and {DATA_ROOT_ENV} is not set"),
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled dataset of beating-heart sequences.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        /// Number of subjects.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disease mix, e.g. `healthy=0.8,lowEF=0.1,thickWall=0.1`.
        #[arg(long)]
        disease_mix: Option<String>,
        /// Train/val/test fractions, e.g. `0.8,0.1,0.1`.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        split: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Train a model on the `train` split of a dataset.
    Train {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the configured training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct one subject bundle through a trained model.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Path to a `subject_<id>` bundle directory.
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic sequences for one covariate profile.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        age: f64,
        /// 0 = female, 1 = male.
        #[arg(long)]
        sex: u8,
        #[arg(long)]
        weight: f64,
        #[arg(long)]
        height: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reconstruction-accuracy report (HD/ASSD tables).
    EvalRecon {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Generation-fidelity report (phenotype KL/WD against covariates).
    EvalGen {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Generated samples per subject (default from config).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compute the condition-shuffled control instead of the matched report.
        #[arg(long)]
        shuffle_conditions: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Extract per-subject latent vectors (and optional correlations).
    Latent {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "all")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the latent-phenotype Pearson correlation matrix.
        #[arg(long)]
        correlations: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Deviation scores against the personalised synthetic norm.
    Delta {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "all")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Synthetic samples per subject (default from config).
        #[arg(long)]
        n_synth: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Cross-validated disease classification over feature sets.
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "all")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "lowEF")]
        positive: String,
        #[arg(long, default_value = "healthy")]
        negative: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

/// Snapshot of one run: the subcommand, its flags, and the full configuration.
#[derive(Serialize)]
struct ResolvedRun<'a> {
    command: &'a str,
    args: BTreeMap<String, String>,
    config: &'a RunConfig,
}

fn write_resolved(
    out_dir: &Path,
    command: &str,
    args: &[(&str, String)],
    config: &RunConfig,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let resolved = ResolvedRun {
        command,
        args: args
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        config,
    };
    fs::write(
        out_dir.join("resolved_config.json"),
        serde_json::to_string_pretty(&resolved)? + "\n",
    )?;
    Ok(())
}

fn parse_disease_mix(s: &str) -> Result<DiseaseMix> {
    let mut mix = DiseaseMix {
        healthy: 0.0,
        low_ef: 0.0,
        thick_wall: 0.0,
    };
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .with_context(|| format!("invalid disease-mix entry `{part}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("invalid proportion in `{part}`"))?;
        match key.trim() {
            "healthy" => mix.healthy = value,
            "lowEF" => mix.low_ef = value,
            "thickWall" => mix.thick_wall = value,
            other => bail!("unknown disease label `{other}` in mix"),
        }
    }
    mix.validate()?;
    Ok(mix)
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::SynthData {
            out,
            n,
            seed,
            disease_mix,
            split,
            workers,
        } => {
            let mix = match &disease_mix {
                Some(s) => parse_disease_mix(s)?,
                None => config.mix,
            };
            config.mix = mix;
            let fractions = SplitFractions::parse(&split)?;
            write_resolved(
                &out,
                "synth-data",
                &[
                    ("n", n.to_string()),
                    ("seed", seed.to_string()),
                    ("split", split.clone()),
                ],
                &config,
            )?;
            synth_dataset(&out, n, seed, &mix, &config.toy, &config.ranges, fractions, workers)?;
            eprintln!("wrote {n} bundles to {}", out.display());
        }
        Command::Train {
            data,
            out,
            epochs,
            seed,
        } => {
            let dataset = data.resolve()?;
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            if let Some(s) = seed {
                config.train.seed = s;
            }
            write_resolved(
                &out,
                "train",
                &[
                    ("data", dataset.display().to_string()),
                    ("epochs", config.train.epochs.to_string()),
                    ("seed", config.train.seed.to_string()),
                ],
                &config,
            )?;
            let outcome = train::train(&dataset, &out, &config)?;
            eprintln!(
                "final checkpoint: {} (log: {})",
                outcome.final_dir.display(),
                outcome.log_path.display()
            );
        }
        Command::Reconstruct {
            checkpoint: ckpt_dir,
            bundle,
            out,
        } => {
            let ckpt = checkpoint::load(&ckpt_dir)?;
            let (record, seq) = read_bundle(&bundle)?;
            write_resolved(
                &out,
                "reconstruct",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("bundle", bundle.display().to_string()),
                ],
                &config,
            )?;
            let (frames, _) = ckpt.model.reconstruct(&seq)?;
            let recon = ckpt
                .model
                .tensors_to_sequence(&frames, seq.subject_id.clone(), seq.conditions);
            write_bundle(&out, &record, &recon)?;
            eprintln!(
                "reconstructed subject `{}` into {}",
                seq.subject_id,
                out.display()
            );
        }
        Command::Generate {
            checkpoint: ckpt_dir,
            out,
            age,
            sex,
            weight,
            height,
            n,
            seed,
        } => {
            let ckpt = checkpoint::load(&ckpt_dir)?;
            let conditions = ClinicalConditions {
                age_years: age,
                sex,
                weight_kg: weight,
                height_cm: height,
            };
            conditions.validate().map_err(anyhow::Error::from)?;
            write_resolved(
                &out,
                "generate",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("n", n.to_string()),
                    ("seed", seed.to_string()),
                    (
                        "conditions",
                        format!("age={age},sex={sex},weight={weight},height={height}"),
                    ),
                ],
                &config,
            )?;
            let samples = ckpt.model.generate(&conditions, n, seed)?;
            let mut entries = Vec::with_capacity(n);
            for (i, frames) in samples.iter().enumerate() {
                let id = format!("gen{i:03}");
                let seq = ckpt
                    .model
                    .tensors_to_sequence(frames, id.clone(), conditions);
                let record = SubjectRecord {
                    conditions,
                    disease_label: DiseaseLabel::Healthy,
                    seed: cardioseq_core::rng::derive_seed(seed, i as u64),
                };
                write_bundle(&out, &record, &seq)?;
                entries.push(ManifestEntry {
                    id,
                    split: "test".to_string(),
                });
            }
            Manifest { subjects: entries }.write(&out)?;
            eprintln!("generated {n} sequences into {}", out.display());
        }
        Command::EvalRecon {
            checkpoint: ckpt_dir,
            data,
            split,
            out,
            workers,
        } => {
            let dataset = data.resolve()?;
            let ckpt = checkpoint::load(&ckpt_dir)?;
            write_resolved(
                &out,
                "eval-recon",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("data", dataset.display().to_string()),
                    ("split", split.clone()),
                ],
                &config,
            )?;
            let rep = report::recon_report(&ckpt, &dataset, &split, workers)?;
            report::write_recon_report(&rep, &out)?;
            eprintln!("wrote recon_table.csv and recon_report.json to {}", out.display());
        }
        Command::EvalGen {
            checkpoint: ckpt_dir,
            data,
            split,
            out,
            samples,
            seed,
            shuffle_conditions,
            workers,
        } => {
            let dataset = data.resolve()?;
            let ckpt = checkpoint::load(&ckpt_dir)?;
            if let Some(s) = samples {
                config.eval.samples_per_subject = s;
            }
            write_resolved(
                &out,
                "eval-gen",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("data", dataset.display().to_string()),
                    ("split", split.clone()),
                    ("samples", config.eval.samples_per_subject.to_string()),
                    ("seed", seed.to_string()),
                    ("shuffle_conditions", shuffle_conditions.to_string()),
                ],
                &config,
            )?;
            let rep = report::generation_report(
                &ckpt,
                &dataset,
                &split,
                &config.eval,
                seed,
                shuffle_conditions,
                workers,
            )?;
            report::write_gen_report(&rep, &out)?;
            eprintln!("wrote generation tables to {}", out.display());
        }
        Command::Latent {
            checkpoint: ckpt_dir,
            data,
            split,
            out,
            correlations,
            workers,
        } => {
            let dataset = data.resolve()?;
            let ckpt = checkpoint::load(&ckpt_dir)?;
            write_resolved(
                &out,
                "latent",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("data", dataset.display().to_string()),
                    ("split", split.clone()),
                    ("correlations", correlations.to_string()),
                ],
                &config,
            )?;
            let features = analysis::subject_features(
                &ckpt,
                &dataset,
                &split,
                ckpt.meta.latent_mode,
                workers,
            )?;
            analysis::write_latent_table(
                &features,
                ckpt.meta.model.d_latent,
                &out,
                correlations,
            )?;
            eprintln!("wrote latents.csv to {}", out.display());
        }
        Command::Delta {
            checkpoint: ckpt_dir,
            data,
            split,
            out,
            n_synth,
            seed,
            workers,
        } => {
            let dataset = data.resolve()?;
            let ckpt = checkpoint::load(&ckpt_dir)?;
            if let Some(n) = n_synth {
                config.eval.n_synth = n;
            }
            write_resolved(
                &out,
                "delta",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("data", dataset.display().to_string()),
                    ("split", split.clone()),
                    ("n_synth", config.eval.n_synth.to_string()),
                    ("seed", seed.to_string()),
                ],
                &config,
            )?;
            let rows = analysis::delta_table(
                &ckpt,
                &dataset,
                &split,
                config.eval.n_synth,
                seed,
                ckpt.meta.latent_mode,
                workers,
            )?;
            analysis::write_delta_table(&rows, &out)?;
            eprintln!("wrote delta_scores.csv to {}", out.display());
        }
        Command::Classify {
            checkpoint: ckpt_dir,
            data,
            split,
            out,
            positive,
            negative,
            folds,
            seed,
            workers,
        } => {
            let dataset = data.resolve()?;
            let ckpt = checkpoint::load(&ckpt_dir)?;
            let positive = DiseaseLabel::parse(&positive).map_err(anyhow::Error::from)?;
            let negative = DiseaseLabel::parse(&negative).map_err(anyhow::Error::from)?;
            write_resolved(
                &out,
                "classify",
                &[
                    ("checkpoint", ckpt_dir.display().to_string()),
                    ("data", dataset.display().to_string()),
                    ("split", split.clone()),
                    ("positive", positive.as_str().to_string()),
                    ("negative", negative.as_str().to_string()),
                    ("folds", folds.to_string()),
                    ("seed", seed.to_string()),
                ],
                &config,
            )?;
            let features = analysis::subject_features(
                &ckpt,
                &dataset,
                &split,
                ckpt.meta.latent_mode,
                workers,
            )?;
            let rows = analysis::classify_table(&features, positive, negative, folds, seed)?;
            analysis::write_feature_table(&features, &out)?;
            analysis::write_classify_table(&rows, seed, &out)?;
            eprintln!(
                "wrote features.csv and classification_auc.csv to {}",
                out.display()
            );
        }
    }
    Ok(())
}
