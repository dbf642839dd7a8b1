//! Network building blocks: parameter storage, normalized graph adjacency,
//! linear/normalization layers, multi-head attention, and Transformer blocks.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

/// Symmetric sparse matrix in CSR form.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<u32>,
    pub col: Vec<u32>,
    pub val: Vec<f32>,
}

impl CsrMatrix {
    /// Symmetric-normalized adjacency with self-loops,
    /// `D^{-1/2} (A + I) D^{-1/2}`, from per-vertex neighbor lists.
    pub fn normalized_adjacency(neighbors: &[Vec<u32>]) -> CsrMatrix {
        let n = neighbors.len();
        let degree: Vec<f32> = neighbors.iter().map(|l| (l.len() + 1) as f32).collect();
        let mut row_ptr: Vec<u32> = Vec::with_capacity(n + 1);
        let mut col: Vec<u32> = Vec::new();
        let mut val: Vec<f32> = Vec::new();
        row_ptr.push(0);
        for (i, list) in neighbors.iter().enumerate() {
            let d_i = degree[i];
            let mut self_inserted = false;
            let push_entry = |j: u32, col: &mut Vec<u32>, val: &mut Vec<f32>| {
                let d_j = degree[j as usize];
                col.push(j);
                val.push(1.0 / libm::sqrtf(d_i * d_j));
            };
            for &j in list {
                if !self_inserted && j as usize > i {
                    push_entry(i as u32, &mut col, &mut val);
                    self_inserted = true;
                }
                push_entry(j, &mut col, &mut val);
            }
            if !self_inserted {
                push_entry(i as u32, &mut col, &mut val);
            }
            row_ptr.push(col.len() as u32);
        }
        CsrMatrix {
            n,
            row_ptr,
            col,
            val,
        }
    }

    /// `self * x` for dense row-major `x`.
    pub fn mul_dense(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.rows(), self.n, "sparse/dense dimension mismatch");
        let cols = x.cols();
        let mut out = Tensor::zeros(self.n, cols);
        for i in 0..self.n {
            let lo = self.row_ptr[i] as usize;
            let hi = self.row_ptr[i + 1] as usize;
            let out_row = &mut out.data_mut()[i * cols..(i + 1) * cols];
            for e in lo..hi {
                let j = self.col[e] as usize;
                let w = self.val[e];
                let x_row = &x.data()[j * cols..(j + 1) * cols];
                for (o, &v) in out_row.iter_mut().zip(x_row.iter()) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

/// Weight initialization schemes.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanInUniform { fan_in: usize },
    /// He (rectifier-gain) uniform, `[-sqrt(6/fan_in), sqrt(6/fan_in)]`;
    /// variance-preserving through ReLU-family activations.
    HeUniform { fan_in: usize },
    Zeros,
    Ones,
    Normal { std: f32 },
}

/// Flat, ordered store of named parameter tensors.
///
/// Layers hold [`ParamId`] indices; a forward pass binds every parameter to a
/// tape once (in order) and layers look their variables up in the returned
/// binding, so a parameter used by several graph sites still accumulates one
/// gradient.
#[derive(Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub usize);

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn alloc(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut Rng,
    ) -> ParamId {
        let tensor = match init {
            Init::FanInUniform { fan_in } => {
                let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
                Tensor::from_fn(rows, cols, |_, _| rng.uniform(-bound, bound) as f32)
            }
            Init::HeUniform { fan_in } => {
                let bound = libm::sqrt(6.0 / fan_in.max(1) as f64);
                Tensor::from_fn(rows, cols, |_, _| rng.uniform(-bound, bound) as f32)
            }
            Init::Zeros => Tensor::zeros(rows, cols),
            Init::Ones => Tensor::from_fn(rows, cols, |_, _| 1.0),
            Init::Normal { std } => {
                Tensor::from_fn(rows, cols, |_, _| (rng.next_normal() as f32) * std)
            }
        };
        self.names.push(name.into());
        self.tensors.push(Arc::new(tensor));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn tensor(&self, id: ParamId) -> &Arc<Tensor> {
        &self.tensors[id.0]
    }

    pub fn tensor_by_index(&self, idx: usize) -> &Arc<Tensor> {
        &self.tensors[idx]
    }

    /// Replaces a tensor (checkpoint loading); shape must match.
    pub fn replace(&mut self, idx: usize, tensor: Tensor) {
        assert_eq!(
            self.tensors[idx].shape(),
            tensor.shape(),
            "parameter `{}` shape mismatch",
            self.names[idx]
        );
        self.tensors[idx] = Arc::new(tensor);
    }

    /// Mutable access for the optimizer; clones only if a tape still holds
    /// the value (none does between steps).
    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        Arc::make_mut(&mut self.tensors[idx])
    }

    /// Binds every parameter to the tape as a leaf, in storage order.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        Binding {
            vars: self.tensors.iter().map(|t| tape.leaf(t.clone())).collect(),
        }
    }
}

/// Per-tape variable ids for every parameter, in [`ParamSet`] order.
pub struct Binding {
    vars: Vec<VarId>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> VarId {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }
}

/// Dense affine layer `x W + b` with `W: in x out`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        inp: usize,
        out: usize,
        rng: &mut Rng,
    ) -> Linear {
        Linear::with_weight_init(params, name, inp, out, Init::FanInUniform { fan_in: inp }, rng)
    }

    /// A layer feeding a ReLU-family activation: rectifier-gain weights so
    /// activation variance survives deep stacks.
    pub fn new_rectified(
        params: &mut ParamSet,
        name: &str,
        inp: usize,
        out: usize,
        rng: &mut Rng,
    ) -> Linear {
        Linear::with_weight_init(params, name, inp, out, Init::HeUniform { fan_in: inp }, rng)
    }

    fn with_weight_init(
        params: &mut ParamSet,
        name: &str,
        inp: usize,
        out: usize,
        weight_init: Init,
        rng: &mut Rng,
    ) -> Linear {
        let w = params.alloc(alloc::format!("{name}.weight"), inp, out, weight_init, rng);
        let b = params.alloc(
            alloc::format!("{name}.bias"),
            1,
            out,
            Init::FanInUniform { fan_in: inp },
            rng,
        );
        Linear { w, b }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Binding, x: VarId) -> VarId {
        let y = tape.matmul(x, bound.var(self.w));
        tape.add_bias(y, bound.var(self.b))
    }
}

/// Learnable layer normalization.
#[derive(Clone, Copy, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(params: &mut ParamSet, name: &str, dim: usize, rng: &mut Rng) -> LayerNorm {
        let gain = params.alloc(alloc::format!("{name}.gain"), 1, dim, Init::Ones, rng);
        let bias = params.alloc(alloc::format!("{name}.bias"), 1, dim, Init::Zeros, rng);
        LayerNorm { gain, bias }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Binding, x: VarId) -> VarId {
        tape.layer_norm(x, bound.var(self.gain), bound.var(self.bias))
    }
}

/// Multi-head attention with separate query and key/value sources.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> MultiHeadAttention {
        assert!(dim.is_multiple_of(heads), "heads must divide the model width");
        MultiHeadAttention {
            wq: Linear::new(params, &alloc::format!("{name}.q"), dim, dim, rng),
            wk: Linear::new(params, &alloc::format!("{name}.k"), dim, dim, rng),
            wv: Linear::new(params, &alloc::format!("{name}.v"), dim, dim, rng),
            wo: Linear::new(params, &alloc::format!("{name}.out"), dim, dim, rng),
            heads,
            dim,
        }
    }

    /// `queries: Tq x dim`, `memory: Tk x dim` -> `Tq x dim`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        queries: VarId,
        memory: VarId,
    ) -> VarId {
        let q = self.wq.forward(tape, bound, queries);
        let k = self.wk.forward(tape, bound, memory);
        let v = self.wv.forward(tape, bound, memory);
        let head_dim = self.dim / self.heads;
        let scale = 1.0 / libm::sqrtf(head_dim as f32);
        let mut head_outputs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let c0 = h * head_dim;
            let c1 = c0 + head_dim;
            let qh = tape.slice_cols(q, c0, c1);
            let kh = tape.slice_cols(k, c0, c1);
            let vh = tape.slice_cols(v, c0, c1);
            let logits = tape.matmul_nt(qh, kh);
            let logits = tape.scale(logits, scale);
            let weights = tape.softmax_rows(logits);
            head_outputs.push(tape.matmul(weights, vh));
        }
        let mut merged = head_outputs[0];
        for &h in &head_outputs[1..] {
            merged = tape.concat_cols(merged, h);
        }
        self.wo.forward(tape, bound, merged)
    }
}

/// Pre-normalization Transformer encoder block:
/// `x += MSA(LN(x)); x += MLP(LN(x))`, with dropout after each sublayer.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub ln_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln_mlp: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub dropout: f32,
}

impl EncoderBlock {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        dim: usize,
        heads: usize,
        ff: usize,
        dropout: f32,
        rng: &mut Rng,
    ) -> EncoderBlock {
        EncoderBlock {
            ln_attn: LayerNorm::new(params, &alloc::format!("{name}.ln_attn"), dim, rng),
            attn: MultiHeadAttention::new(params, &alloc::format!("{name}.attn"), dim, heads, rng),
            ln_mlp: LayerNorm::new(params, &alloc::format!("{name}.ln_mlp"), dim, rng),
            ff1: Linear::new_rectified(params, &alloc::format!("{name}.ff1"), dim, ff, rng),
            ff2: Linear::new(params, &alloc::format!("{name}.ff2"), ff, dim, rng),
            dropout,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        x: VarId,
        train: bool,
        rng: &mut Rng,
    ) -> VarId {
        let normed = self.ln_attn.forward(tape, bound, x);
        let mut attended = self.attn.forward(tape, bound, normed, normed);
        if train {
            attended = tape.dropout(attended, self.dropout, rng);
        }
        let x = tape.add(x, attended);

        let normed = self.ln_mlp.forward(tape, bound, x);
        let hidden = self.ff1.forward(tape, bound, normed);
        let hidden = tape.gelu(hidden);
        let mut mlp = self.ff2.forward(tape, bound, hidden);
        if train {
            mlp = tape.dropout(mlp, self.dropout, rng);
        }
        tape.add(x, mlp)
    }
}

/// Pre-normalization Transformer decoder block with self-attention over the
/// queries and cross-attention into the memory.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub ln_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln_mlp: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub dropout: f32,
}

impl DecoderBlock {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        dim: usize,
        heads: usize,
        ff: usize,
        dropout: f32,
        rng: &mut Rng,
    ) -> DecoderBlock {
        DecoderBlock {
            ln_self: LayerNorm::new(params, &alloc::format!("{name}.ln_self"), dim, rng),
            self_attn: MultiHeadAttention::new(
                params,
                &alloc::format!("{name}.self_attn"),
                dim,
                heads,
                rng,
            ),
            ln_cross: LayerNorm::new(params, &alloc::format!("{name}.ln_cross"), dim, rng),
            cross_attn: MultiHeadAttention::new(
                params,
                &alloc::format!("{name}.cross_attn"),
                dim,
                heads,
                rng,
            ),
            ln_mlp: LayerNorm::new(params, &alloc::format!("{name}.ln_mlp"), dim, rng),
            ff1: Linear::new_rectified(params, &alloc::format!("{name}.ff1"), dim, ff, rng),
            ff2: Linear::new(params, &alloc::format!("{name}.ff2"), ff, dim, rng),
            dropout,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Binding,
        x: VarId,
        memory: VarId,
        train: bool,
        rng: &mut Rng,
    ) -> VarId {
        let normed = self.ln_self.forward(tape, bound, x);
        let mut attended = self.self_attn.forward(tape, bound, normed, normed);
        if train {
            attended = tape.dropout(attended, self.dropout, rng);
        }
        let x = tape.add(x, attended);

        let normed = self.ln_cross.forward(tape, bound, x);
        let mut cross = self.cross_attn.forward(tape, bound, normed, memory);
        if train {
            cross = tape.dropout(cross, self.dropout, rng);
        }
        let x = tape.add(x, cross);

        let normed = self.ln_mlp.forward(tape, bound, x);
        let hidden = self.ff1.forward(tape, bound, normed);
        let hidden = tape.gelu(hidden);
        let mut mlp = self.ff2.forward(tape, bound, hidden);
        if train {
            mlp = tape.dropout(mlp, self.dropout, rng);
        }
        tape.add(x, mlp)
    }
}
