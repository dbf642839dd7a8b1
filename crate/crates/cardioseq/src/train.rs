//! Training-loop orchestration: seeded epoch order, per-epoch loss logging,
//! checkpointing, and evaluation over dataset splits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use cardioseq_core::losses::LossBreakdown;
use cardioseq_core::mesh::MeshSequence;
use cardioseq_core::model::{training_step, ModelConfig, SequenceVae};
use cardioseq_core::model::ConditionNorm;
use cardioseq_core::optim::Adam;
use cardioseq_core::rng::{derive_seed, Rng};
use cardioseq_core::tensor::Tensor;
use cardioseq_core::toy::SubjectRecord;

use crate::bundle::{load_split, Manifest};
use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;

pub struct TrainOutcome {
    pub final_dir: PathBuf,
    pub best_dir: Option<PathBuf>,
    pub log_path: PathBuf,
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    let n = parts.len().max(1) as f64;
    let sum = |f: &dyn Fn(&LossBreakdown) -> f64| parts.iter().map(f).sum::<f64>() / n;
    LossBreakdown {
        reconstruction: sum(&|b| b.reconstruction),
        kl: sum(&|b| b.kl),
        smoothing: sum(&|b| b.smoothing),
        total: sum(&|b| b.total),
        beta: parts.first().map(|b| b.beta).unwrap_or_default(),
        lambda_s: parts.first().map(|b| b.lambda_s).unwrap_or_default(),
    }
}

fn log_row(log: &mut fs::File, epoch: usize, split: &str, b: &LossBreakdown) -> Result<()> {
    writeln!(
        log,
        "{epoch},{split},{},{},{},{}",
        b.reconstruction, b.kl, b.smoothing, b.total
    )?;
    Ok(())
}

/// Trains on the `train` split of `dataset_dir`, logging per-epoch mean
/// losses for train (and `val` when present) to `training_log.csv`, and
/// writing final plus best-validation checkpoints under `out_dir`.
pub fn train(dataset_dir: &Path, out_dir: &Path, config: &RunConfig) -> Result<TrainOutcome> {
    let subjects = load_split(dataset_dir, "train").context("loading train split")?;
    let manifest = Manifest::read(dataset_dir)?;
    let has_val = manifest.subjects.iter().any(|e| e.split == "val");
    let val_subjects = if has_val {
        load_split(dataset_dir, "val").context("loading val split")?
    } else {
        Vec::new()
    };

    let settings = &config.train;
    let seed = settings.seed;
    let (mut model, train_frames) = build_model(&subjects, config)?;

    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("training_log.csv");
    let mut log = fs::File::create(&log_path)?;
    writeln!(log, "epoch,split,reconstruction,kl,smoothing,total")?;

    let mut adam = Adam::new(settings.optimizer, &model.params);
    let mut noise_rng = Rng::from_seed(derive_seed(seed, 2));
    let mut best_val = f64::INFINITY;
    let mut best_dir: Option<PathBuf> = None;
    let mut global_step = 0usize;

    for epoch in 0..settings.epochs {
        let order = Rng::from_seed(derive_seed(seed, 1000 + epoch as u64))
            .permutation(subjects.len());
        let mut epoch_losses = Vec::with_capacity(subjects.len());
        let mut clipped_steps = 0usize;
        for &idx in &order {
            let (record, seq) = &subjects[idx];
            let result = training_step(
                &mut model,
                &mut adam,
                &train_frames[idx],
                &record.conditions,
                &settings.loss,
                settings.grad_clip_norm,
                &mut noise_rng,
            )
            .with_context(|| {
                format!(
                    "aborting at step {global_step} (epoch {epoch}, subject `{}`)",
                    seq.subject_id
                )
            })?;
            if result.clipped {
                clipped_steps += 1;
            }
            epoch_losses.push(result.breakdown);
            global_step += 1;
        }
        let train_mean = mean_breakdown(&epoch_losses);
        log_row(&mut log, epoch, "train", &train_mean)?;

        let mut status = format!(
            "epoch {epoch}: train total {:.4} (recon {:.4} kl {:.5} smooth {:.4})",
            train_mean.total, train_mean.reconstruction, train_mean.kl, train_mean.smoothing
        );
        if clipped_steps > 0 {
            status.push_str(&format!(" [gradient clip triggered {clipped_steps}x]"));
        }
        if !val_subjects.is_empty() {
            let val_mean = evaluate_subjects(&model, &val_subjects, config)?;
            log_row(&mut log, epoch, "val", &val_mean)?;
            status.push_str(&format!(" val total {:.4}", val_mean.total));
            if val_mean.total < best_val {
                best_val = val_mean.total;
                let dir = out_dir.join("checkpoint-best");
                checkpoint::save(
                    &dir,
                    &model,
                    &settings.loss,
                    &settings.optimizer,
                    seed,
                    epoch + 1,
                    settings.latent_mode,
                )?;
                best_dir = Some(dir);
            }
        }
        if settings.checkpoint_every > 0 && (epoch + 1) % settings.checkpoint_every == 0 {
            let dir = out_dir.join(format!("checkpoint-epoch-{:04}", epoch + 1));
            checkpoint::save(
                &dir,
                &model,
                &settings.loss,
                &settings.optimizer,
                seed,
                epoch + 1,
                settings.latent_mode,
            )?;
        }
        log.flush()?;
        eprintln!("{status}");
    }

    let final_dir = out_dir.join("checkpoint-final");
    checkpoint::save(
        &final_dir,
        &model,
        &settings.loss,
        &settings.optimizer,
        seed,
        settings.epochs,
        settings.latent_mode,
    )?;
    Ok(TrainOutcome {
        final_dir,
        best_dir,
        log_path,
    })
}

fn evaluate_subjects(
    model: &SequenceVae,
    subjects: &[(SubjectRecord, MeshSequence)],
    config: &RunConfig,
) -> Result<LossBreakdown> {
    let parts: Vec<LossBreakdown> = subjects
        .iter()
        .map(|(_, seq)| model.evaluate_breakdown(seq, &config.train.loss))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_breakdown(&parts))
}

/// Evaluation-mode mean loss of a checkpoint over one dataset split.
pub fn evaluate_loss(
    checkpoint: &Checkpoint,
    dataset_dir: &Path,
    split: &str,
) -> Result<LossBreakdown> {
    let subjects = load_split(dataset_dir, split)?;
    if subjects.is_empty() {
        bail!("split `{split}` has no subjects");
    }
    let parts: Vec<LossBreakdown> = subjects
        .iter()
        .map(|(_, seq)| {
            checkpoint
                .model
                .evaluate_breakdown(seq, &checkpoint.meta.loss)
                .map_err(anyhow::Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_breakdown(&parts))
}

/// Builds the model exactly as the training loop would: frame count and
/// condition statistics fitted on the train split, weights seeded from the
/// training seed, and (when configured) the decoder output layer
/// re-initialized to decode the train-split mean shape. Also returns the
/// topology-checked frame tensors.
fn build_model(
    subjects: &[(SubjectRecord, MeshSequence)],
    config: &RunConfig,
) -> Result<(SequenceVae, Vec<Vec<Tensor>>)> {
    let first = &subjects
        .first()
        .ok_or_else(|| anyhow!("train split is empty"))?
        .1
        .frames[0];
    let mut model_config: ModelConfig = config.model.clone();
    model_config.frames = subjects[0].1.frames.len();
    model_config.condition_norm = ConditionNorm::fit(
        &subjects.iter().map(|(r, _)| r.conditions).collect::<Vec<_>>(),
    );
    let mut model = SequenceVae::new(
        model_config,
        first.faces.clone(),
        first.vertex_labels.clone(),
        derive_seed(config.train.seed, 0),
    )?;

    let mut train_frames: Vec<Vec<Tensor>> = Vec::with_capacity(subjects.len());
    for (_, seq) in subjects {
        train_frames.push(model.sequence_tensors(seq)?);
    }

    if config.train.init_output_to_mean_shape {
        let width = 3 * model.config.vertex_count;
        let mut mean = vec![0.0f64; width];
        let mut frames_seen = 0usize;
        for frames in &train_frames {
            for frame in frames {
                for (m, &v) in mean.iter_mut().zip(frame.data().iter()) {
                    *m += v as f64;
                }
                frames_seen += 1;
            }
        }
        let scale = 1.0 / (frames_seen as f64 * model.config.coord_scale_mm as f64);
        let bias = Tensor::from_vec(
            1,
            width,
            mean.iter().map(|&m| (m * scale) as f32).collect(),
        );
        model.init_output_from_shape(bias)?;
    }
    Ok((model, train_frames))
}

/// The model the training loop would start from, without training.
pub fn initial_model(dataset_dir: &Path, config: &RunConfig) -> Result<SequenceVae> {
    let subjects = load_split(dataset_dir, "train")?;
    Ok(build_model(&subjects, config)?.0)
}
