//! Self-describing model checkpoints.
//!
//! A checkpoint directory holds `model.json` (configuration, loss weights,
//! optimizer settings, seeds, parameter count, and the template topology
//! hash), `weights.bin` (named tensors, little-endian float32), and
//! `template.bin` (the template faces and vertex labels). Loading needs no
//! external dataset.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cardioseq_core::latent::LatentMode;
use cardioseq_core::model::{LossWeights, ModelConfig, SequenceVae};
use cardioseq_core::optim::AdamConfig;
use cardioseq_core::tensor::Tensor;

const WEIGHTS_MAGIC: &[u8; 4] = b"CSQW";
const TEMPLATE_MAGIC: &[u8; 4] = b"CSQT";
const FORMAT_VERSION: u32 = 1;

/// Sidecar metadata stored as `model.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub optimizer: AdamConfig,
    pub train_seed: u64,
    pub weight_seed: u64,
    pub epochs_trained: usize,
    pub param_count: usize,
    /// Hash of (vertex count, faces, labels); hex with 0x prefix.
    pub topology_hash: String,
    #[serde(default)]
    pub latent_mode: LatentMode,
}

/// A loaded model plus its sidecar.
pub struct Checkpoint {
    pub model: SequenceVae,
    pub meta: CheckpointMeta,
    pub path: PathBuf,
}

/// Writes `dir/{model.json, weights.bin, template.bin}`.
pub fn save(
    dir: &Path,
    model: &SequenceVae,
    loss: &LossWeights,
    optimizer: &AdamConfig,
    train_seed: u64,
    epochs_trained: usize,
    latent_mode: LatentMode,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        model: model.config.clone(),
        loss: *loss,
        optimizer: *optimizer,
        train_seed,
        weight_seed: model.weight_seed,
        epochs_trained,
        param_count: model.param_count(),
        topology_hash: format!("{:#x}", model.topology_hash()),
        latent_mode,
    };
    fs::write(
        dir.join("model.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;

    let mut weights: Vec<u8> = Vec::new();
    weights.extend_from_slice(WEIGHTS_MAGIC);
    weights.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    weights.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for i in 0..model.params.len() {
        let name = model.params.name(i).as_bytes();
        let tensor = model.params.tensor_by_index(i);
        weights.extend_from_slice(&(name.len() as u32).to_le_bytes());
        weights.extend_from_slice(name);
        weights.extend_from_slice(&(tensor.rows() as u32).to_le_bytes());
        weights.extend_from_slice(&(tensor.cols() as u32).to_le_bytes());
        for &v in tensor.data() {
            weights.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(dir.join("weights.bin"), weights)?;

    let mut template: Vec<u8> = Vec::new();
    template.extend_from_slice(TEMPLATE_MAGIC);
    template.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    template.extend_from_slice(&(model.template_labels.len() as u32).to_le_bytes());
    template.extend_from_slice(&(model.template_faces.len() as u32).to_le_bytes());
    for face in model.template_faces.iter() {
        for &i in face {
            template.extend_from_slice(&i.to_le_bytes());
        }
    }
    template.extend_from_slice(&model.template_labels);
    fs::write(dir.join("template.bin"), template)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    file: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            bail!(
                "format error in `{}`: truncated at byte {} (wanted {n} more)",
                self.file,
                self.at
            );
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Loads a checkpoint directory and rebuilds the model.
pub fn load(dir: &Path) -> Result<Checkpoint> {
    let meta_text = fs::read_to_string(dir.join("model.json"))
        .with_context(|| format!("missing `model.json` in {}", dir.display()))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .with_context(|| format!("parsing {}/model.json", dir.display()))?;
    if meta.format_version != FORMAT_VERSION {
        bail!(
            "unsupported checkpoint format version {} (expected {FORMAT_VERSION})",
            meta.format_version
        );
    }

    let template_bytes = fs::read(dir.join("template.bin"))
        .with_context(|| format!("missing `template.bin` in {}", dir.display()))?;
    let mut cur = Cursor {
        bytes: &template_bytes,
        at: 0,
        file: "template.bin",
    };
    if cur.take(4)? != TEMPLATE_MAGIC {
        bail!("format error in `template.bin`: bad magic");
    }
    let _version = cur.u32()?;
    let v = cur.u32()? as usize;
    let f = cur.u32()? as usize;
    let mut faces = Vec::with_capacity(f);
    for _ in 0..f {
        faces.push([cur.u32()?, cur.u32()?, cur.u32()?]);
    }
    let labels = cur.take(v)?.to_vec();

    let mut model = SequenceVae::new(meta.model.clone(), faces, labels, meta.weight_seed)
        .context("rebuilding model from checkpoint")?;
    let expected_hash = format!("{:#x}", model.topology_hash());
    if expected_hash != meta.topology_hash {
        bail!(
            "checkpoint template hash {} does not match sidecar {}",
            expected_hash,
            meta.topology_hash
        );
    }

    let weight_bytes = fs::read(dir.join("weights.bin"))
        .with_context(|| format!("missing `weights.bin` in {}", dir.display()))?;
    let mut cur = Cursor {
        bytes: &weight_bytes,
        at: 0,
        file: "weights.bin",
    };
    if cur.take(4)? != WEIGHTS_MAGIC {
        bail!("format error in `weights.bin`: bad magic");
    }
    let _version = cur.u32()?;
    let count = cur.u32()? as usize;
    if count != model.params.len() {
        bail!(
            "format error in `weights.bin`: {count} tensors but the configuration defines {}",
            model.params.len()
        );
    }
    for i in 0..count {
        let name_len = cur.u32()? as usize;
        let name = core::str::from_utf8(cur.take(name_len)?)
            .context("format error in `weights.bin`: non-utf8 tensor name")?;
        if name != model.params.name(i) {
            bail!(
                "format error in `weights.bin`: tensor {i} is `{name}`, expected `{}`",
                model.params.name(i)
            );
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let expected = model.params.tensor_by_index(i).shape();
        if (rows, cols) != expected {
            bail!(
                "format error in `weights.bin`: tensor `{name}` has shape {rows}x{cols}, expected {}x{}",
                expected.0,
                expected.1
            );
        }
        let raw = cur.take(rows * cols * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if data.iter().any(|x| !x.is_finite()) {
            bail!("format error in `weights.bin`: non-finite value in tensor `{name}`");
        }
        model.params.replace(i, Tensor::from_vec(rows, cols, data));
    }

    Ok(Checkpoint {
        model,
        meta,
        path: dir.to_path_buf(),
    })
}
