//! Latent-vector extraction and the personalised-norm deviation score.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreResult;
use crate::mesh::{ClinicalConditions, MeshSequence};
use crate::model::SequenceVae;
use crate::rng::derive_seed;
use crate::tensor::Tensor;

/// Which encoder output represents a sequence in latent space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    /// Mean of the temporal-encoder outputs at the frame-token positions
    /// (before reparameterization). The default.
    #[default]
    FrameMean,
    /// Posterior mean read from the distribution tokens; isolated here as
    /// the alternative reading.
    PosteriorMean,
}

/// Per-subject latent representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentVector {
    pub z: Vec<f64>,
    pub source: LatentSource,
    pub subject_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSource {
    Real,
    Synthetic,
}

/// Deviation of a subject from its personalised synthetic norm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaScore {
    pub delta_z: f64,
    pub n_synth: usize,
    pub seed: u64,
}

fn frame_mean(frame_outputs: &Tensor) -> Vec<f64> {
    let (t, d) = frame_outputs.shape();
    let mut out = alloc::vec![0.0f64; d];
    for i in 0..t {
        for (o, &v) in out.iter_mut().zip(frame_outputs.row(i).iter()) {
            *o += v as f64;
        }
    }
    for o in &mut out {
        *o /= t as f64;
    }
    out
}

/// Extracts the latent vector of a sequence (evaluation mode).
pub fn latent_vector(model: &SequenceVae, seq: &MeshSequence, mode: LatentMode) -> CoreResult<Vec<f64>> {
    let state = model.encode_sequence(seq)?;
    Ok(match mode {
        LatentMode::FrameMean => frame_mean(&state.frame_outputs),
        LatentMode::PosteriorMean => state.mu.iter().map(|&v| v as f64).collect(),
    })
}

/// Latent vector from pre-extracted frame tensors.
pub fn latent_vector_from_frames(
    model: &SequenceVae,
    frames: &[Tensor],
    conditions: &ClinicalConditions,
    mode: LatentMode,
) -> Vec<f64> {
    let state = model.encode_frames_eval(frames, conditions);
    match mode {
        LatentMode::FrameMean => frame_mean(&state.frame_outputs),
        LatentMode::PosteriorMean => state.mu.iter().map(|&v| v as f64).collect(),
    }
}

/// Mean latent vector of `n_synth` generated sequences under `conditions`,
/// each decoded from a standard-normal draw and re-encoded through the mesh
/// and temporal encoders.
pub fn synthetic_norm_latent(
    model: &SequenceVae,
    conditions: &ClinicalConditions,
    n_synth: usize,
    seed: u64,
    mode: LatentMode,
) -> CoreResult<Vec<f64>> {
    let d = model.config.d_latent;
    let mut mean = alloc::vec![0.0f64; d];
    for i in 0..n_synth {
        let sample_seed = derive_seed(seed, i as u64);
        let mut rng = crate::rng::Rng::from_seed(sample_seed);
        let z: Vec<f32> = (0..d).map(|_| rng.next_normal() as f32).collect();
        let frames = model.decode_latent(&z, conditions)?;
        let z_synth = latent_vector_from_frames(model, &frames, conditions, mode);
        for (m, v) in mean.iter_mut().zip(z_synth.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_synth.max(1) as f64;
    }
    Ok(mean)
}

/// Euclidean distance between a subject's latent vector and the mean latent
/// vector of `n_synth` synthetic sequences generated under the subject's
/// conditions. Deterministic in `seed`.
pub fn latent_delta(
    model: &SequenceVae,
    seq: &MeshSequence,
    conditions: &ClinicalConditions,
    n_synth: usize,
    seed: u64,
    mode: LatentMode,
) -> CoreResult<DeltaScore> {
    let z_real = latent_vector(model, seq, mode)?;
    let z_norm = synthetic_norm_latent(model, conditions, n_synth, seed, mode)?;
    Ok(DeltaScore {
        delta_z: euclidean(&z_real, &z_norm),
        n_synth,
        seed,
    })
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    libm::sqrt(
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum(),
    )
}
