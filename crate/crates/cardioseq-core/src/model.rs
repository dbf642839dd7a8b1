//! The conditional spatiotemporal mesh-sequence VAE.
//!
//! Encoding: a shared graph-convolutional encoder turns each frame into a
//! latent vector; frame latents are concatenated with the condition embedding,
//! projected, prepended with two learnable distribution tokens, and passed
//! through a temporal Transformer encoder. The outputs at the token positions
//! parameterize a Gaussian (mean and log-variance) from which the sequence
//! latent is drawn by reparameterization.
//!
//! Decoding: sinusoidal temporal positional encodings act as queries into a
//! Transformer decoder whose memory is the projected `[z_a; z_c]` vector; a
//! fully connected mesh decoder maps each frame output to vertex coordinates.
//! Decoding is non-autoregressive: all frames are produced in one pass.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::losses::{self, LossBreakdown};
use crate::mesh::{build_adjacency, topology_hash, CardiacMesh, ClinicalConditions, MeshSequence};
use crate::nn::{Binding, CsrMatrix, DecoderBlock, EncoderBlock, Init, Linear, ParamSet};
use crate::optim::Adam;
use crate::rng::{derive_seed, Rng};
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

/// Z-score statistics for the continuous condition fields (sex passes
/// through untouched).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionNorm {
    pub age_mean: f64,
    pub age_std: f64,
    pub weight_mean: f64,
    pub weight_std: f64,
    pub height_mean: f64,
    pub height_std: f64,
}

impl Default for ConditionNorm {
    fn default() -> Self {
        ConditionNorm {
            age_mean: 60.0,
            age_std: 12.0,
            weight_mean: 75.0,
            weight_std: 15.0,
            height_mean: 170.0,
            height_std: 12.0,
        }
    }
}

impl ConditionNorm {
    /// Fits the statistics on a set of training conditions.
    pub fn fit(conditions: &[ClinicalConditions]) -> ConditionNorm {
        let n = conditions.len().max(1) as f64;
        let mean = |f: &dyn Fn(&ClinicalConditions) -> f64| {
            conditions.iter().map(f).sum::<f64>() / n
        };
        let std = |f: &dyn Fn(&ClinicalConditions) -> f64, m: f64| {
            let v = conditions.iter().map(|c| (f(c) - m) * (f(c) - m)).sum::<f64>() / n;
            libm::sqrt(v).max(1e-6)
        };
        let age = |c: &ClinicalConditions| c.age_years;
        let weight = |c: &ClinicalConditions| c.weight_kg;
        let height = |c: &ClinicalConditions| c.height_cm;
        let (am, wm, hm) = (mean(&age), mean(&weight), mean(&height));
        ConditionNorm {
            age_mean: am,
            age_std: std(&age, am),
            weight_mean: wm,
            weight_std: std(&weight, wm),
            height_mean: hm,
            height_std: std(&height, hm),
        }
    }

    /// `[zscore(age), sex, zscore(weight), zscore(height)]`.
    pub fn normalize(&self, c: &ClinicalConditions) -> [f32; 4] {
        [
            ((c.age_years - self.age_mean) / self.age_std) as f32,
            c.sex as f32,
            ((c.weight_kg - self.weight_mean) / self.weight_std) as f32,
            ((c.height_cm - self.height_mean) / self.height_std) as f32,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_latent: usize,
    pub d_condition: usize,
    /// Output width of each graph-convolution layer.
    pub gcn_hidden: Vec<usize>,
    pub transformer_layers: usize,
    pub attention_heads: usize,
    pub feed_forward_size: usize,
    pub dropout: f32,
    /// Hidden widths of the mesh decoder; a final layer to `3 V` follows.
    pub mesh_decoder_hidden: Vec<usize>,
    pub frames: usize,
    pub vertex_count: usize,
    pub face_count: usize,
    /// Fixed scale dividing input coordinates (and multiplying outputs) so
    /// the network operates near unit range.
    pub coord_scale_mm: f32,
    pub condition_norm: ConditionNorm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_latent: 64,
            d_condition: 32,
            gcn_hidden: vec![32, 32, 64],
            transformer_layers: 2,
            attention_heads: 4,
            feed_forward_size: 1024,
            dropout: 0.1,
            mesh_decoder_hidden: vec![64, 128, 256, 512],
            frames: 20,
            vertex_count: 0,
            face_count: 0,
            coord_scale_mm: 50.0,
            condition_norm: ConditionNorm::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if self.d_latent == 0 || !self.d_latent.is_multiple_of(2) {
            return Err(CoreError::Param(format!(
                "d_latent must be positive and even, got {}",
                self.d_latent
            )));
        }
        if self.attention_heads == 0 || !self.d_latent.is_multiple_of(self.attention_heads) {
            return Err(CoreError::Param(format!(
                "attention_heads ({}) must divide d_latent ({})",
                self.attention_heads, self.d_latent
            )));
        }
        if self.d_condition == 0
            || self.transformer_layers == 0
            || self.feed_forward_size == 0
            || self.gcn_hidden.is_empty()
            || self.mesh_decoder_hidden.is_empty()
        {
            return Err(CoreError::Param("all layer counts must be >= 1".into()));
        }
        if self.frames < 2 {
            return Err(CoreError::Param(format!(
                "frames must be >= 2, got {}",
                self.frames
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CoreError::Param(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.coord_scale_mm > 0.0) {
            return Err(CoreError::Param("coord_scale_mm must be > 0".into()));
        }
        Ok(())
    }
}

/// Sinusoidal temporal positional encoding with sin/cos pairs: entry `2k` is
/// `sin(t / 10000^{2k/d})` and entry `2k+1` is `cos` of the same argument.
pub fn positional_encoding(t: usize, d: usize) -> CoreResult<Vec<f64>> {
    if !d.is_multiple_of(2) {
        return Err(CoreError::Param(format!(
            "positional encoding dimension must be even, got {d}"
        )));
    }
    let mut out = Vec::with_capacity(d);
    for k in 0..d / 2 {
        let angle = t as f64 / libm::pow(10000.0, 2.0 * k as f64 / d as f64);
        out.push(libm::sin(angle));
        out.push(libm::cos(angle));
    }
    Ok(out)
}

fn positional_encoding_matrix(frames: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(frames * d);
    for t in 0..frames {
        for v in positional_encoding(t, d).expect("d validated even") {
            data.push(v as f32);
        }
    }
    Tensor::from_vec(frames, d, data)
}

/// Posterior parameters and per-frame encoder outputs for one sequence.
#[derive(Clone, Debug)]
pub struct LatentState {
    pub mu: Vec<f32>,
    pub logvar: Vec<f32>,
    /// Sampled latent: `mu + eps * exp(0.5 * logvar)` for the recorded eps.
    pub z_a: Vec<f32>,
    pub eps: Vec<f32>,
    /// Transformer-encoder outputs at the frame-token positions, `T x d`.
    pub frame_outputs: Tensor,
}

/// Value-level reparameterization: `mu + eps * exp(0.5 * logvar)`.
pub fn reparameterize(mu: &[f32], logvar: &[f32], eps: &[f32]) -> Vec<f32> {
    mu.iter()
        .zip(logvar.iter())
        .zip(eps.iter())
        .map(|((&m, &lv), &e)| m + e * libm::expf(0.5 * lv))
        .collect()
}

/// Draws eps from the standard normal and reparameterizes.
pub fn reparameterize_with(mu: &[f32], logvar: &[f32], rng: &mut Rng) -> (Vec<f32>, Vec<f32>) {
    let eps: Vec<f32> = (0..mu.len()).map(|_| rng.next_normal() as f32).collect();
    (reparameterize(mu, logvar, &eps), eps)
}

/// Loss weights of the training objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub beta: f64,
    pub lambda_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: losses::DEFAULT_BETA,
            lambda_s: losses::DEFAULT_LAMBDA_S,
        }
    }
}

/// The assembled network plus its template topology.
pub struct SequenceVae {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub template_faces: Arc<Vec<[u32; 3]>>,
    pub template_labels: Arc<Vec<u8>>,
    /// Normalized adjacency for graph convolutions.
    pub gcn_adjacency: Arc<CsrMatrix>,
    /// Raw neighbor lists for the smoothing penalty.
    pub smooth_adjacency: Arc<Vec<Vec<u32>>>,
    pub weight_seed: u64,
    topology: u64,

    cond1: Linear,
    cond2: Linear,
    gcn: Vec<Linear>,
    gcn_fc: Linear,
    enc_in: Linear,
    mu_token: crate::nn::ParamId,
    sigma_token: crate::nn::ParamId,
    enc_blocks: Vec<EncoderBlock>,
    mem_proj: Linear,
    dec_blocks: Vec<DecoderBlock>,
    mesh_dec: Vec<Linear>,
    query_cache: Tensor,
}

impl SequenceVae {
    pub fn new(
        mut config: ModelConfig,
        faces: Vec<[u32; 3]>,
        vertex_labels: Vec<u8>,
        weight_seed: u64,
    ) -> CoreResult<SequenceVae> {
        let v = vertex_labels.len();
        config.vertex_count = v;
        config.face_count = faces.len();
        config.validate()?;
        let neighbors = build_adjacency(&faces, v)?;
        let gcn_adjacency = Arc::new(CsrMatrix::normalized_adjacency(&neighbors));
        let smooth_adjacency = Arc::new(neighbors);
        let topology = topology_hash(v, &faces, &vertex_labels);

        let mut rng = Rng::from_seed(weight_seed);
        let mut params = ParamSet::new();
        let d = config.d_latent;
        let dc = config.d_condition;

        let cond1 = Linear::new_rectified(&mut params, "cond.fc1", 4, dc, &mut rng);
        let cond2 = Linear::new(&mut params, "cond.fc2", dc, dc, &mut rng);

        let mut gcn = Vec::new();
        let mut width = 3;
        for (i, &h) in config.gcn_hidden.iter().enumerate() {
            gcn.push(Linear::new_rectified(
                &mut params,
                &format!("mesh_enc.gcn{i}"),
                width,
                h,
                &mut rng,
            ));
            width = h;
        }
        let gcn_fc = Linear::new(&mut params, "mesh_enc.fc", width, d, &mut rng);

        let enc_in = Linear::new(&mut params, "temporal_enc.input", d + dc, d, &mut rng);
        let mu_token = params.alloc("temporal_enc.mu_token", 1, d, Init::Normal { std: 0.02 }, &mut rng);
        let sigma_token = params.alloc(
            "temporal_enc.sigma_token",
            1,
            d,
            Init::Normal { std: 0.02 },
            &mut rng,
        );
        let enc_blocks = (0..config.transformer_layers)
            .map(|i| {
                EncoderBlock::new(
                    &mut params,
                    &format!("temporal_enc.block{i}"),
                    d,
                    config.attention_heads,
                    config.feed_forward_size,
                    config.dropout,
                    &mut rng,
                )
            })
            .collect();

        let mem_proj = Linear::new(&mut params, "temporal_dec.memory", d + dc, d, &mut rng);
        let dec_blocks = (0..config.transformer_layers)
            .map(|i| {
                DecoderBlock::new(
                    &mut params,
                    &format!("temporal_dec.block{i}"),
                    d,
                    config.attention_heads,
                    config.feed_forward_size,
                    config.dropout,
                    &mut rng,
                )
            })
            .collect();

        let mut mesh_dec = Vec::new();
        let mut width = d;
        for (i, &h) in config.mesh_decoder_hidden.iter().enumerate() {
            mesh_dec.push(Linear::new_rectified(
                &mut params,
                &format!("mesh_dec.fc{i}"),
                width,
                h,
                &mut rng,
            ));
            width = h;
        }
        mesh_dec.push(Linear::new(
            &mut params,
            &format!("mesh_dec.fc{}", config.mesh_decoder_hidden.len()),
            width,
            3 * v,
            &mut rng,
        ));

        let query_cache = positional_encoding_matrix(config.frames, d);
        Ok(SequenceVae {
            config,
            params,
            template_faces: Arc::new(faces),
            template_labels: Arc::new(vertex_labels),
            gcn_adjacency,
            smooth_adjacency,
            weight_seed,
            topology,
            cond1,
            cond2,
            gcn,
            gcn_fc,
            enc_in,
            mu_token,
            sigma_token,
            enc_blocks,
            mem_proj,
            dec_blocks,
            mesh_dec,
            query_cache,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.element_count()
    }

    pub fn topology_hash(&self) -> u64 {
        self.topology
    }

    /// Re-initializes the mesh decoder's output layer to decode a fixed
    /// shape: the final weights are zeroed and the bias set to `shape`
    /// (`1 x 3V`, in coordinate units divided by `coord_scale_mm`).
    ///
    /// Starting every vertex at a mean shape keeps the template's
    /// vertex-to-structure assignment intact from step 0, which the
    /// correspondence-free Chamfer objective cannot recover on its own once
    /// vertices scatter across structures.
    pub fn init_output_from_shape(&mut self, shape: Tensor) -> CoreResult<()> {
        let expected = (1, 3 * self.config.vertex_count);
        if shape.shape() != expected {
            return Err(CoreError::Shape(format!(
                "output shape bias has shape {:?}, expected {:?}",
                shape.shape(),
                expected
            )));
        }
        let last = self.mesh_dec.last().expect("mesh decoder is non-empty");
        let (rows, cols) = self.params.tensor(last.w).shape();
        self.params.replace(last.w.0, Tensor::zeros(rows, cols));
        self.params.replace(last.b.0, shape);
        Ok(())
    }

    /// Tensor view (`V x 3`, mm) of a mesh that must match the template.
    pub fn frame_tensor(&self, mesh: &CardiacMesh) -> CoreResult<Tensor> {
        if mesh.vertex_count() != self.config.vertex_count {
            return Err(CoreError::Shape(format!(
                "mesh has {} vertices, model template has {}",
                mesh.vertex_count(),
                self.config.vertex_count
            )));
        }
        Ok(Tensor::from_points_f32(&mesh.vertices))
    }

    /// Tensor views of all frames, with topology hash verification.
    pub fn sequence_tensors(&self, seq: &MeshSequence) -> CoreResult<Vec<Tensor>> {
        if seq.frames.len() != self.config.frames {
            return Err(CoreError::Shape(format!(
                "sequence has {} frames, model expects {}",
                seq.frames.len(),
                self.config.frames
            )));
        }
        let first = &seq.frames[0];
        let hash = topology_hash(first.vertex_count(), &first.faces, &first.vertex_labels);
        if hash != self.topology {
            return Err(CoreError::Shape(format!(
                "sequence topology {hash:#x} does not match model template {:#x}",
                self.topology
            )));
        }
        seq.frames.iter().map(|f| self.frame_tensor(f)).collect()
    }

    /// Wraps decoder outputs into a mesh sequence on the template topology.
    pub fn tensors_to_sequence(
        &self,
        frames: &[Tensor],
        subject_id: String,
        conditions: ClinicalConditions,
    ) -> MeshSequence {
        let meshes = frames
            .iter()
            .map(|t| {
                let mut vertices = Vec::with_capacity(t.rows());
                for i in 0..t.rows() {
                    let r = t.row(i);
                    vertices.push([r[0], r[1], r[2]]);
                }
                CardiacMesh {
                    vertices,
                    faces: self.template_faces.as_ref().clone(),
                    vertex_labels: self.template_labels.as_ref().clone(),
                }
            })
            .collect();
        MeshSequence {
            frames: meshes,
            subject_id,
            conditions,
        }
    }

    // ---- graph construction ----

    fn conditions_var(&self, tape: &mut Tape, bound: &Binding, c: &ClinicalConditions) -> VarId {
        let normed = self.config.condition_norm.normalize(c);
        let x = tape.constant(Tensor::from_vec(1, 4, normed.to_vec()));
        let h = self.cond1.forward(tape, bound, x);
        let h = tape.relu(h);
        self.cond2.forward(tape, bound, h)
    }

    fn frame_latent_var(&self, tape: &mut Tape, bound: &Binding, coords_mm: &Tensor) -> VarId {
        let scale = 1.0 / self.config.coord_scale_mm;
        let mut x = tape.constant(coords_mm.map(|v| v * scale));
        for layer in &self.gcn {
            x = tape.spmm(&self.gcn_adjacency, x);
            x = layer.forward(tape, bound, x);
            x = tape.relu(x);
        }
        let pooled = tape.mean_rows(x);
        self.gcn_fc.forward(tape, bound, pooled)
    }

    /// Assembles `[mu_token; sigma_token; tokens]` and runs the encoder
    /// blocks; returns `(mu, logvar, frame_outputs)`.
    fn temporal_encode_vars(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        frame_latents: &[VarId],
        z_c: VarId,
        train: bool,
        rng: &mut Rng,
    ) -> (VarId, VarId, VarId) {
        let t_frames = frame_latents.len();
        let mut rows = Vec::with_capacity(t_frames + 2);
        rows.push(bound.var(self.mu_token));
        rows.push(bound.var(self.sigma_token));
        for &z_t in frame_latents {
            let with_cond = tape.concat_cols(z_t, z_c);
            rows.push(self.enc_in.forward(tape, bound, with_cond));
        }
        let mut x = tape.concat_rows(&rows);
        for block in &self.enc_blocks {
            x = block.forward(tape, bound, x, train, rng);
        }
        let mu = tape.slice_rows(x, 0, 1);
        let logvar = tape.slice_rows(x, 1, 2);
        let frames = tape.slice_rows(x, 2, 2 + t_frames);
        (mu, logvar, frames)
    }

    /// Decodes `z_a` (1 x d) under conditions into a `T x 3V` coordinate
    /// matrix in millimetres.
    fn decode_vars(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        z_a: VarId,
        z_c: VarId,
        train: bool,
        rng: &mut Rng,
    ) -> VarId {
        let joined = tape.concat_cols(z_a, z_c);
        let memory = self.mem_proj.forward(tape, bound, joined);
        let mut x = tape.constant(self.query_cache.clone());
        for block in &self.dec_blocks {
            x = block.forward(tape, bound, x, memory, train, rng);
        }
        for (i, layer) in self.mesh_dec.iter().enumerate() {
            x = layer.forward(tape, bound, x);
            if i + 1 < self.mesh_dec.len() {
                x = tape.relu(x);
            }
        }
        tape.scale(x, self.config.coord_scale_mm)
    }

    /// Full encode-reparameterize-decode pass on a tape.
    ///
    /// `eps`: per-dimension standard normal draw for the reparameterization;
    /// `None` uses the posterior mean (evaluation mode).
    #[allow(clippy::too_many_arguments)]
    pub fn forward_vars(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        target_frames: &[Tensor],
        conditions: &ClinicalConditions,
        train: bool,
        eps: Option<&[f32]>,
        rng: &mut Rng,
    ) -> ForwardVars {
        let z_c = self.conditions_var(tape, bound, conditions);
        let frame_latents: Vec<VarId> = target_frames
            .iter()
            .map(|coords| self.frame_latent_var(tape, bound, coords))
            .collect();
        let (mu, logvar, frame_outputs) =
            self.temporal_encode_vars(tape, bound, &frame_latents, z_c, train, rng);
        let z_a = match eps {
            Some(e) => {
                let half = tape.scale(logvar, 0.5);
                let sigma = tape.exp_elem(half);
                let e = tape.constant(Tensor::from_vec(1, e.len(), e.to_vec()));
                let noise = tape.mul(sigma, e);
                tape.add(mu, noise)
            }
            None => mu,
        };
        let coords = self.decode_vars(tape, bound, z_a, z_c, train, rng);
        ForwardVars {
            mu,
            logvar,
            z_a,
            frame_outputs,
            coords,
        }
    }

    // ---- evaluation-mode entry points ----

    /// Condition embedding (evaluation mode).
    pub fn encode_conditions(&self, c: &ClinicalConditions) -> CoreResult<Vec<f32>> {
        c.validate()?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let z_c = self.conditions_var(&mut tape, &bound, c);
        Ok(tape.value(z_c).data().to_vec())
    }

    /// Per-frame mesh embedding (evaluation mode).
    pub fn encode_mesh_frame(&self, mesh: &CardiacMesh) -> CoreResult<Vec<f32>> {
        let coords = self.frame_tensor(mesh)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let z = self.frame_latent_var(&mut tape, &bound, &coords);
        Ok(tape.value(z).data().to_vec())
    }

    /// Encodes a full sequence in evaluation mode (`eps = 0`, no dropout).
    pub fn encode_sequence(&self, seq: &MeshSequence) -> CoreResult<LatentState> {
        let frames = self.sequence_tensors(seq)?;
        Ok(self.encode_frames_eval(&frames, &seq.conditions))
    }

    /// As [`Self::encode_sequence`] over pre-extracted frame tensors.
    pub fn encode_frames_eval(
        &self,
        frames: &[Tensor],
        conditions: &ClinicalConditions,
    ) -> LatentState {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let mut rng = Rng::from_seed(0);
        let z_c = self.conditions_var(&mut tape, &bound, conditions);
        let frame_latents: Vec<VarId> = frames
            .iter()
            .map(|coords| self.frame_latent_var(&mut tape, &bound, coords))
            .collect();
        let (mu, logvar, frame_outputs) =
            self.temporal_encode_vars(&mut tape, &bound, &frame_latents, z_c, false, &mut rng);
        let mu = tape.value(mu).data().to_vec();
        let logvar = tape.value(logvar).data().to_vec();
        let frame_outputs = tape.value(frame_outputs).as_ref().clone();
        LatentState {
            z_a: mu.clone(),
            eps: vec![0.0; mu.len()],
            mu,
            logvar,
            frame_outputs,
        }
    }

    /// Deterministic reconstruction (evaluation mode, posterior mean).
    pub fn reconstruct(&self, seq: &MeshSequence) -> CoreResult<(Vec<Tensor>, LatentState)> {
        let frames = self.sequence_tensors(seq)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let mut rng = Rng::from_seed(0);
        let out = self.forward_vars(
            &mut tape,
            &bound,
            &frames,
            &seq.conditions,
            false,
            None,
            &mut rng,
        );
        let state = LatentState {
            mu: tape.value(out.mu).data().to_vec(),
            logvar: tape.value(out.logvar).data().to_vec(),
            z_a: tape.value(out.z_a).data().to_vec(),
            eps: vec![0.0; self.config.d_latent],
            frame_outputs: tape.value(out.frame_outputs).as_ref().clone(),
        };
        Ok((self.split_coord_frames(tape.value(out.coords)), state))
    }

    /// Splits a `T x 3V` coordinate matrix into per-frame `V x 3` tensors.
    fn split_coord_frames(&self, coords: &Tensor) -> Vec<Tensor> {
        let v = self.config.vertex_count;
        (0..coords.rows())
            .map(|t| {
                Tensor::from_vec(v, 3, coords.row(t).to_vec())
            })
            .collect()
    }

    /// Decodes one latent draw under `conditions` (evaluation mode).
    pub fn decode_latent(
        &self,
        z_a: &[f32],
        conditions: &ClinicalConditions,
    ) -> CoreResult<Vec<Tensor>> {
        if z_a.len() != self.config.d_latent {
            return Err(CoreError::Shape(format!(
                "latent has dimension {}, model expects {}",
                z_a.len(),
                self.config.d_latent
            )));
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let mut rng = Rng::from_seed(0);
        let z_c = self.conditions_var(&mut tape, &bound, conditions);
        let z = tape.constant(Tensor::from_vec(1, z_a.len(), z_a.to_vec()));
        let coords = self.decode_vars(&mut tape, &bound, z, z_c, false, &mut rng);
        Ok(self.split_coord_frames(tape.value(coords)))
    }

    /// Draws `n_samples` latents from the standard normal and decodes each;
    /// deterministic in `seed`.
    pub fn generate(
        &self,
        conditions: &ClinicalConditions,
        n_samples: usize,
        seed: u64,
    ) -> CoreResult<Vec<Vec<Tensor>>> {
        conditions.validate()?;
        let d = self.config.d_latent;
        (0..n_samples)
            .map(|i| {
                let mut rng = Rng::from_seed(derive_seed(seed, i as u64));
                let z: Vec<f32> = (0..d).map(|_| rng.next_normal() as f32).collect();
                self.decode_latent(&z, conditions)
            })
            .collect()
    }

    /// Evaluation-mode loss (posterior-mean reconstruction, f64 arithmetic).
    pub fn evaluate_breakdown(
        &self,
        seq: &MeshSequence,
        weights: &LossWeights,
    ) -> CoreResult<LossBreakdown> {
        let (recon, state) = self.reconstruct(seq)?;
        let recon_pts: Vec<Vec<[f64; 3]>> = recon.iter().map(|f| f.to_points_f64()).collect();
        let target_pts: Vec<Vec<[f64; 3]>> = seq
            .frames
            .iter()
            .map(|f| f.vertices_f64())
            .collect();
        let rec = losses::reconstruction_loss(&recon_pts, &target_pts)?;
        let mu64: Vec<f64> = state.mu.iter().map(|&v| v as f64).collect();
        let lv64: Vec<f64> = state.logvar.iter().map(|&v| v as f64).collect();
        let kl = losses::kl_loss(&mu64, &lv64, weights.beta);
        let smooth = losses::laplacian_loss(&recon_pts, &self.smooth_adjacency);
        Ok(losses::total_loss(rec, kl, smooth, weights.lambda_s, weights.beta))
    }
}

/// Tape variables produced by one forward pass.
pub struct ForwardVars {
    pub mu: VarId,
    pub logvar: VarId,
    pub z_a: VarId,
    pub frame_outputs: VarId,
    /// `T x 3V` coordinates in millimetres.
    pub coords: VarId,
}

/// Result of one optimization step.
pub struct StepResult {
    pub breakdown: LossBreakdown,
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Runs one training step (forward, backward, Adam update) on one sequence.
pub fn training_step(
    model: &mut SequenceVae,
    adam: &mut Adam,
    target_frames: &[Tensor],
    conditions: &ClinicalConditions,
    weights: &LossWeights,
    clip_norm: Option<f64>,
    rng: &mut Rng,
) -> CoreResult<StepResult> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let eps: Vec<f32> = (0..model.config.d_latent)
        .map(|_| rng.next_normal() as f32)
        .collect();
    let out = model.forward_vars(
        &mut tape,
        &bound,
        target_frames,
        conditions,
        true,
        Some(&eps),
        rng,
    );

    let t_frames = target_frames.len();
    let v = model.config.vertex_count;
    let mut chamfer_terms = Vec::with_capacity(t_frames);
    let mut smooth_terms = Vec::with_capacity(t_frames);
    for (t, target) in target_frames.iter().enumerate() {
        let row = tape.slice_rows(out.coords, t, t + 1);
        let frame = tape.reshape(row, v, 3);
        let target_pts = target.to_points_f64();
        chamfer_terms.push(tape.chamfer_to(frame, &target_pts));
        smooth_terms.push(tape.laplacian(frame, &model.smooth_adjacency));
    }
    let recon_sum = tape.sum_vars(&chamfer_terms);
    let recon = tape.scale(recon_sum, 1.0 / t_frames as f32);
    let smooth_sum = tape.sum_vars(&smooth_terms);
    let smooth = tape.scale(smooth_sum, 1.0 / t_frames as f32);
    let kl = tape.kl_divergence(out.mu, out.logvar, weights.beta);

    let partial = tape.add(recon, kl);
    let weighted_smooth = tape.scale(smooth, weights.lambda_s as f32);
    let total = tape.add(partial, weighted_smooth);

    let breakdown = losses::total_loss(
        tape.value(recon).item() as f64,
        tape.value(kl).item() as f64,
        tape.value(smooth).item() as f64,
        weights.lambda_s,
        weights.beta,
    );
    if !breakdown.is_finite() {
        return Err(CoreError::Input(format!(
            "non-finite loss: reconstruction {}, kl {}, smoothing {}",
            breakdown.reconstruction, breakdown.kl, breakdown.smoothing
        )));
    }

    let mut store = tape.backward(total);
    let mut grads: Vec<Option<Tensor>> = bound
        .vars()
        .iter()
        .map(|&v| store.take(v))
        .collect();
    let norm = adam.step(&mut model.params, &mut grads, clip_norm);
    let clipped = clip_norm.map(|c| norm > c).unwrap_or(false);
    Ok(StepResult {
        breakdown,
        grad_norm: norm,
        clipped,
    })
}
