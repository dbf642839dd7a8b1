//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records one forward pass as a flat list of nodes; calling
//! [`Tape::backward`] replays it in reverse, accumulating gradients into a
//! [`GradStore`] indexed by variable id. Values are reference-counted so
//! binding model parameters to a tape copies nothing. Everything is
//! single-threaded and evaluation order is fixed, which keeps training
//! bit-reproducible.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::losses;
use crate::rng::Rng;
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};

pub type VarId = usize;

const LAYER_NORM_EPS: f32 = 1e-5;

type BackFn = Box<dyn FnOnce(&Tensor, &mut GradStore)>;

/// Gradients keyed by variable id, populated by [`Tape::backward`].
pub struct GradStore {
    grads: Vec<Option<Tensor>>,
}

impl GradStore {
    pub fn accumulate(&mut self, id: VarId, contribution: Tensor) {
        match &mut self.grads[id] {
            Some(g) => g.add_in_place(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor> {
        self.grads[id].take()
    }

    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.grads[id].as_ref()
    }
}

struct Node {
    back: Option<BackFn>,
    needs_grad: bool,
}

/// One recorded forward pass.
#[derive(Default)]
pub struct Tape {
    values: Vec<Arc<Tensor>>,
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    /// A differentiable input (model parameter).
    pub fn leaf(&mut self, value: Arc<Tensor>) -> VarId {
        self.push_value(value, true, None)
    }

    /// A non-differentiable input (data, positional encodings, noise).
    pub fn constant(&mut self, value: Tensor) -> VarId {
        self.push_value(Arc::new(value), false, None)
    }

    pub fn value(&self, id: VarId) -> &Arc<Tensor> {
        &self.values[id]
    }

    pub fn needs_grad(&self, id: VarId) -> bool {
        self.nodes[id].needs_grad
    }

    fn push_value(&mut self, value: Arc<Tensor>, needs_grad: bool, back: Option<BackFn>) -> VarId {
        self.values.push(value);
        self.nodes.push(Node { back, needs_grad });
        self.nodes.len() - 1
    }

    fn push_op(&mut self, value: Tensor, inputs: &[VarId], back: BackFn) -> VarId {
        let needs = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.push_value(Arc::new(value), needs, needs.then_some(back))
    }

    /// Runs the reverse pass from a scalar loss and returns all gradients;
    /// leaf gradients stay in the store for the caller.
    pub fn backward(mut self, loss: VarId) -> GradStore {
        assert_eq!(self.values[loss].shape(), (1, 1), "loss must be scalar");
        let mut store = GradStore {
            grads: vec![None; self.values.len()],
        };
        store.grads[loss] = Some(Tensor::scalar(1.0));
        for id in (0..self.nodes.len()).rev() {
            if let Some(back) = self.nodes[id].back.take() {
                if let Some(g) = store.grads[id].take() {
                    back(&g, &mut store);
                }
            }
        }
        store
    }

    // ---- arithmetic ops ----

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let va = self.values[a].clone();
        let vb = self.values[b].clone();
        let out = gemm_nn(&va, &vb);
        let (na, nb) = (self.nodes[a].needs_grad, self.nodes[b].needs_grad);
        self.push_op(
            out,
            &[a, b],
            Box::new(move |g, store| {
                if na {
                    store.accumulate(a, gemm_nt(g, &vb));
                }
                if nb {
                    store.accumulate(b, gemm_tn(&va, g));
                }
            }),
        )
    }

    /// `A * B^T`, with both operands stored row-major.
    pub fn matmul_nt(&mut self, a: VarId, b: VarId) -> VarId {
        let va = self.values[a].clone();
        let vb = self.values[b].clone();
        let out = gemm_nt(&va, &vb);
        let (na, nb) = (self.nodes[a].needs_grad, self.nodes[b].needs_grad);
        self.push_op(
            out,
            &[a, b],
            Box::new(move |g, store| {
                if na {
                    store.accumulate(a, gemm_nn(g, &vb));
                }
                if nb {
                    store.accumulate(b, gemm_tn(g, &va));
                }
            }),
        )
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let va = self.values[a].clone();
        let vb = self.values[b].clone();
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let mut out = va.as_ref().clone();
        out.add_in_place(&vb);
        let (na, nb) = (self.nodes[a].needs_grad, self.nodes[b].needs_grad);
        self.push_op(
            out,
            &[a, b],
            Box::new(move |g, store| {
                if na {
                    store.accumulate(a, g.clone());
                }
                if nb {
                    store.accumulate(b, g.clone());
                }
            }),
        )
    }

    /// Adds a `1 x n` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: VarId, bias: VarId) -> VarId {
        let vx = self.values[x].clone();
        let vb = self.values[bias].clone();
        assert_eq!(vb.rows(), 1);
        assert_eq!(vx.cols(), vb.cols(), "bias width mismatch");
        let n = vx.cols();
        let mut out = vx.as_ref().clone();
        for row in out.data_mut().chunks_exact_mut(n) {
            for (o, &b) in row.iter_mut().zip(vb.data().iter()) {
                *o += b;
            }
        }
        let (nx, nb) = (self.nodes[x].needs_grad, self.nodes[bias].needs_grad);
        self.push_op(
            out,
            &[x, bias],
            Box::new(move |g, store| {
                if nx {
                    store.accumulate(x, g.clone());
                }
                if nb {
                    let mut gb = Tensor::zeros(1, n);
                    for row in g.data().chunks_exact(n) {
                        for (o, &v) in gb.data_mut().iter_mut().zip(row.iter()) {
                            *o += v;
                        }
                    }
                    store.accumulate(bias, gb);
                }
            }),
        )
    }

    pub fn scale(&mut self, x: VarId, s: f32) -> VarId {
        let vx = self.values[x].clone();
        let out = vx.map(|v| v * s);
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    store.accumulate(x, g.map(|v| v * s));
                }
            }),
        )
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let va = self.values[a].clone();
        let vb = self.values[b].clone();
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let mut out = va.as_ref().clone();
        for (o, &v) in out.data_mut().iter_mut().zip(vb.data().iter()) {
            *o *= v;
        }
        let (na, nb) = (self.nodes[a].needs_grad, self.nodes[b].needs_grad);
        self.push_op(
            out,
            &[a, b],
            Box::new(move |g, store| {
                if na {
                    let mut ga = g.clone();
                    for (o, &v) in ga.data_mut().iter_mut().zip(vb.data().iter()) {
                        *o *= v;
                    }
                    store.accumulate(a, ga);
                }
                if nb {
                    let mut gb = g.clone();
                    for (o, &v) in gb.data_mut().iter_mut().zip(va.data().iter()) {
                        *o *= v;
                    }
                    store.accumulate(b, gb);
                }
            }),
        )
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let out = vx.map(|v| v.max(0.0));
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let mut gx = g.clone();
                    for (o, &v) in gx.data_mut().iter_mut().zip(vx.data().iter()) {
                        if v <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    /// Exact (erf-based) Gaussian error linear unit.
    pub fn gelu(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let out = vx.map(|v| 0.5 * v * (1.0 + libm::erff(v * core::f32::consts::FRAC_1_SQRT_2)));
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let inv_sqrt_2pi = 1.0 / libm::sqrtf(2.0 * core::f32::consts::PI);
                    let mut gx = g.clone();
                    for (o, &v) in gx.data_mut().iter_mut().zip(vx.data().iter()) {
                        let cdf = 0.5 * (1.0 + libm::erff(v * core::f32::consts::FRAC_1_SQRT_2));
                        let pdf = inv_sqrt_2pi * libm::expf(-0.5 * v * v);
                        *o *= cdf + v * pdf;
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    pub fn exp_elem(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let out = vx.map(libm::expf);
        let out_arc = Arc::new(out);
        let out_for_back = out_arc.clone();
        let nx = self.nodes[x].needs_grad;
        let back: BackFn = Box::new(move |g, store| {
            if nx {
                let mut gx = g.clone();
                for (o, &y) in gx.data_mut().iter_mut().zip(out_for_back.data().iter()) {
                    *o *= y;
                }
                store.accumulate(x, gx);
            }
        });
        let needs = self.nodes[x].needs_grad;
        self.push_value(out_arc, needs, needs.then_some(back))
    }

    /// Row-wise layer normalization with learnable gain/bias (`1 x n` each).
    pub fn layer_norm(&mut self, x: VarId, gain: VarId, bias: VarId) -> VarId {
        let vx = self.values[x].clone();
        let vg = self.values[gain].clone();
        let vb = self.values[bias].clone();
        let (m, n) = vx.shape();
        assert_eq!(vg.shape(), (1, n));
        assert_eq!(vb.shape(), (1, n));
        let mut xhat = Tensor::zeros(m, n);
        let mut inv_sigma = vec![0.0f32; m];
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let row = vx.row(i);
            let mean = row.iter().sum::<f32>() / n as f32;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / n as f32;
            let inv = 1.0 / libm::sqrtf(var + LAYER_NORM_EPS);
            inv_sigma[i] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat.set(i, j, h);
                out.set(i, j, h * vg.data()[j] + vb.data()[j]);
            }
        }
        let flags = (
            self.nodes[x].needs_grad,
            self.nodes[gain].needs_grad,
            self.nodes[bias].needs_grad,
        );
        self.push_op(
            out,
            &[x, gain, bias],
            Box::new(move |g, store| {
                let (nx, ng, nb) = flags;
                if ng || nb {
                    let mut ggain = Tensor::zeros(1, n);
                    let mut gbias = Tensor::zeros(1, n);
                    for i in 0..m {
                        for j in 0..n {
                            ggain.data_mut()[j] += g.get(i, j) * xhat.get(i, j);
                            gbias.data_mut()[j] += g.get(i, j);
                        }
                    }
                    if ng {
                        store.accumulate(gain, ggain);
                    }
                    if nb {
                        store.accumulate(bias, gbias);
                    }
                }
                if nx {
                    let mut gx = Tensor::zeros(m, n);
                    for i in 0..m {
                        let mut mean_gh = 0.0f32;
                        let mut mean_gh_xhat = 0.0f32;
                        for j in 0..n {
                            let gh = g.get(i, j) * vg.data()[j];
                            mean_gh += gh;
                            mean_gh_xhat += gh * xhat.get(i, j);
                        }
                        mean_gh /= n as f32;
                        mean_gh_xhat /= n as f32;
                        for j in 0..n {
                            let gh = g.get(i, j) * vg.data()[j];
                            gx.set(
                                i,
                                j,
                                inv_sigma[i] * (gh - mean_gh - xhat.get(i, j) * mean_gh_xhat),
                            );
                        }
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    pub fn softmax_rows(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let row = vx.row(i);
            let max = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
            let mut sum = 0.0f32;
            for j in 0..n {
                let e = libm::expf(row[j] - max);
                out.set(i, j, e);
                sum += e;
            }
            for j in 0..n {
                out.set(i, j, out.get(i, j) / sum);
            }
        }
        let out_arc = Arc::new(out);
        let y = out_arc.clone();
        let nx = self.nodes[x].needs_grad;
        let back: BackFn = Box::new(move |g, store| {
            if nx {
                let mut gx = Tensor::zeros(m, n);
                for i in 0..m {
                    let mut dot = 0.0f32;
                    for j in 0..n {
                        dot += g.get(i, j) * y.get(i, j);
                    }
                    for j in 0..n {
                        gx.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                    }
                }
                store.accumulate(x, gx);
            }
        });
        self.push_value(out_arc, nx, nx.then_some(back))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let va = self.values[a].clone();
        let vb = self.values[b].clone();
        assert_eq!(va.rows(), vb.rows(), "concat_cols row mismatch");
        let (m, p, q) = (va.rows(), va.cols(), vb.cols());
        let mut out = Tensor::zeros(m, p + q);
        for i in 0..m {
            out.data_mut()[i * (p + q)..i * (p + q) + p].copy_from_slice(va.row(i));
            out.data_mut()[i * (p + q) + p..(i + 1) * (p + q)].copy_from_slice(vb.row(i));
        }
        let (na, nb) = (self.nodes[a].needs_grad, self.nodes[b].needs_grad);
        self.push_op(
            out,
            &[a, b],
            Box::new(move |g, store| {
                if na {
                    let mut ga = Tensor::zeros(m, p);
                    for i in 0..m {
                        ga.data_mut()[i * p..(i + 1) * p]
                            .copy_from_slice(&g.row(i)[..p]);
                    }
                    store.accumulate(a, ga);
                }
                if nb {
                    let mut gb = Tensor::zeros(m, q);
                    for i in 0..m {
                        gb.data_mut()[i * q..(i + 1) * q]
                            .copy_from_slice(&g.row(i)[p..]);
                    }
                    store.accumulate(b, gb);
                }
            }),
        )
    }

    pub fn concat_rows(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let vals: Vec<Arc<Tensor>> = parts.iter().map(|&p| self.values[p].clone()).collect();
        let n = vals[0].cols();
        let total_rows: usize = vals.iter().map(|v| v.rows()).sum();
        let mut out = Tensor::zeros(total_rows, n);
        let mut at = 0usize;
        for v in &vals {
            assert_eq!(v.cols(), n, "concat_rows width mismatch");
            out.data_mut()[at..at + v.len()].copy_from_slice(v.data());
            at += v.len();
        }
        let parts_owned: Vec<(VarId, usize, bool)> = parts
            .iter()
            .zip(vals.iter())
            .map(|(&p, v)| (p, v.rows(), self.nodes[p].needs_grad))
            .collect();
        self.push_op(
            out,
            parts,
            Box::new(move |g, store| {
                let mut row = 0usize;
                for (p, rows, needs) in parts_owned {
                    if needs {
                        let mut gp = Tensor::zeros(rows, n);
                        gp.data_mut()
                            .copy_from_slice(&g.data()[row * n..(row + rows) * n]);
                        store.accumulate(p, gp);
                    }
                    row += rows;
                }
            }),
        )
    }

    pub fn slice_rows(&mut self, x: VarId, r0: usize, r1: usize) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        assert!(r0 < r1 && r1 <= m, "slice_rows out of range");
        let mut out = Tensor::zeros(r1 - r0, n);
        out.data_mut().copy_from_slice(&vx.data()[r0 * n..r1 * n]);
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let mut gx = Tensor::zeros(m, n);
                    gx.data_mut()[r0 * n..r1 * n].copy_from_slice(g.data());
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    pub fn slice_cols(&mut self, x: VarId, c0: usize, c1: usize) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        assert!(c0 < c1 && c1 <= n, "slice_cols out of range");
        let w = c1 - c0;
        let mut out = Tensor::zeros(m, w);
        for i in 0..m {
            out.data_mut()[i * w..(i + 1) * w].copy_from_slice(&vx.row(i)[c0..c1]);
        }
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let mut gx = Tensor::zeros(m, n);
                    for i in 0..m {
                        gx.data_mut()[i * n + c0..i * n + c1].copy_from_slice(g.row(i));
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    /// Column means: `m x n -> 1 x n`.
    pub fn mean_rows(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        let mut out = Tensor::zeros(1, n);
        for i in 0..m {
            for (o, &v) in out.data_mut().iter_mut().zip(vx.row(i).iter()) {
                *o += v;
            }
        }
        let inv_m = 1.0 / m as f32;
        for o in out.data_mut() {
            *o *= inv_m;
        }
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let mut gx = Tensor::zeros(m, n);
                    for i in 0..m {
                        for (o, &v) in gx.data_mut()[i * n..(i + 1) * n]
                            .iter_mut()
                            .zip(g.data().iter())
                        {
                            *o = v * inv_m;
                        }
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    pub fn reshape(&mut self, x: VarId, rows: usize, cols: usize) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        let out = vx.reshaped(rows, cols);
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    store.accumulate(x, g.reshaped(m, n));
                }
            }),
        )
    }

    /// Element-wise sum of same-shaped variables.
    pub fn sum_vars(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let mut out = self.values[parts[0]].as_ref().clone();
        for &p in &parts[1..] {
            out.add_in_place(&self.values[p]);
        }
        let flagged: Vec<(VarId, bool)> = parts
            .iter()
            .map(|&p| (p, self.nodes[p].needs_grad))
            .collect();
        self.push_op(
            out,
            parts,
            Box::new(move |g, store| {
                for (p, needs) in flagged {
                    if needs {
                        store.accumulate(p, g.clone());
                    }
                }
            }),
        )
    }

    /// Sum of all elements: any shape -> scalar.
    pub fn sum_all(&mut self, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        let out = Tensor::scalar(vx.data().iter().sum());
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let gv = g.item();
                    store.accumulate(x, Tensor::from_fn(m, n, |_, _| gv));
                }
            }),
        )
    }

    /// Inverted dropout with keep-scaling; identity when `p == 0`.
    pub fn dropout(&mut self, x: VarId, p: f32, rng: &mut Rng) -> VarId {
        if p <= 0.0 {
            return x;
        }
        let vx = self.values[x].clone();
        let (m, n) = vx.shape();
        let keep_scale = 1.0 / (1.0 - p);
        let mask = Tensor::from_fn(m, n, |_, _| {
            if rng.next_f64() < p as f64 {
                0.0
            } else {
                keep_scale
            }
        });
        let mut out = vx.as_ref().clone();
        for (o, &msk) in out.data_mut().iter_mut().zip(mask.data().iter()) {
            *o *= msk;
        }
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    let mut gx = g.clone();
                    for (o, &msk) in gx.data_mut().iter_mut().zip(mask.data().iter()) {
                        *o *= msk;
                    }
                    store.accumulate(x, gx);
                }
            }),
        )
    }

    /// Sparse (CSR) times dense; the matrix is a fixed symmetric operator.
    pub fn spmm(&mut self, adj: &Arc<crate::nn::CsrMatrix>, x: VarId) -> VarId {
        let vx = self.values[x].clone();
        let out = adj.mul_dense(&vx);
        let adj_back = adj.clone();
        let nx = self.nodes[x].needs_grad;
        self.push_op(
            out,
            &[x],
            Box::new(move |g, store| {
                if nx {
                    // symmetric operator: transpose equals itself
                    store.accumulate(x, adj_back.mul_dense(g));
                }
            }),
        )
    }

    /// Chamfer distance from a differentiable `V x 3` vertex tensor to a
    /// fixed target point set; produces a scalar.
    pub fn chamfer_to(&mut self, recon: VarId, target: &[[f64; 3]]) -> VarId {
        let vr = self.values[recon].clone();
        let points = vr.to_points_f64();
        let (value, grad_recon, _) = losses::chamfer_with_grad(&points, target)
            .expect("chamfer inputs are non-empty by construction");
        let grad = Tensor::from_fn(vr.rows(), 3, |i, j| grad_recon[i][j] as f32);
        let nx = self.nodes[recon].needs_grad;
        self.push_op(
            Tensor::scalar(value as f32),
            &[recon],
            Box::new(move |g, store| {
                if nx {
                    let gv = g.item();
                    store.accumulate(recon, grad.map(|v| v * gv));
                }
            }),
        )
    }

    /// Neighborhood-centroid smoothing penalty of a `V x 3` vertex tensor.
    pub fn laplacian(&mut self, verts: VarId, adjacency: &Arc<Vec<Vec<u32>>>) -> VarId {
        let vv = self.values[verts].clone();
        let points = vv.to_points_f64();
        let (value, grad_pts) = losses::laplacian_frame_with_grad(&points, adjacency);
        let grad = Tensor::from_fn(vv.rows(), 3, |i, j| grad_pts[i][j] as f32);
        let nx = self.nodes[verts].needs_grad;
        self.push_op(
            Tensor::scalar(value as f32),
            &[verts],
            Box::new(move |g, store| {
                if nx {
                    let gv = g.item();
                    store.accumulate(verts, grad.map(|v| v * gv));
                }
            }),
        )
    }

    /// beta-weighted KL divergence to the standard normal; `mu` and `logvar`
    /// are `1 x d`.
    pub fn kl_divergence(&mut self, mu: VarId, logvar: VarId, beta: f64) -> VarId {
        let vm = self.values[mu].clone();
        let vl = self.values[logvar].clone();
        assert_eq!(vm.shape(), vl.shape(), "kl shape mismatch");
        let mu64: Vec<f64> = vm.data().iter().map(|&v| v as f64).collect();
        let lv64: Vec<f64> = vl.data().iter().map(|&v| v as f64).collect();
        let (value, gm, gl) = losses::kl_loss_with_grad(&mu64, &lv64, beta);
        let gm = Tensor::from_fn(1, vm.cols(), |_, j| gm[j] as f32);
        let gl = Tensor::from_fn(1, vl.cols(), |_, j| gl[j] as f32);
        let (nm, nl) = (self.nodes[mu].needs_grad, self.nodes[logvar].needs_grad);
        self.push_op(
            Tensor::scalar(value as f32),
            &[mu, logvar],
            Box::new(move |g, store| {
                let gv = g.item();
                if nm {
                    store.accumulate(mu, gm.map(|v| v * gv));
                }
                if nl {
                    store.accumulate(logvar, gl.map(|v| v * gv));
                }
            }),
        )
    }
}
