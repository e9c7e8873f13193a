//! Eager reverse-mode tape.
//!
//! A `Graph` is built per training/inference step and discarded. Every op
//! computes its value immediately and records enough to replay the chain
//! rule backwards. Gradients accumulate additively; leaves are either
//! plain inputs (gradient readable off the graph) or `Param` nodes bound
//! to a [`ParamSet`](super::params::ParamSet).

use rand::Rng as _;

use super::ndarray::{NdArray, Real};
use super::params::{ParamId, ParamSet};
use crate::util::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, Real),
    Row(NodeId, usize),
    Cols(NodeId, usize, usize),
    Concat1(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    Transpose(NodeId),
    MatMul(NodeId, NodeId),
    MatMulTB(NodeId, NodeId),
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Conv1d { x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize },
    Upsample2(NodeId),
    Embedding { table: NodeId, ids: Vec<usize> },
    LeakyRelu(NodeId, Real),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId },
    StraightThrough { continuous: NodeId },
    CrossEntropy { logits: NodeId, targets: Vec<i64>, reduction: Reduction },
    L1Loss(NodeId, NodeId),
    MseLoss(NodeId, NodeId),
    Sum(NodeId),
    Mean(NodeId),
}

struct Node {
    op: Op,
    value: NdArray,
}

const LAYER_NORM_EPS: Real = 1e-5;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<NdArray>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &NdArray {
        &self.nodes[id.idx()].value
    }

    /// Gradient of the last `backward` loss w.r.t. this node, if reached.
    pub fn grad(&self, id: NodeId) -> Option<&NdArray> {
        self.grads.get(id.idx()).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, value: NdArray) -> NodeId {
        debug_assert!(value.all_finite(), "non-finite forward value from {op:?}");
        self.nodes.push(Node { op, value });
        NodeId((self.nodes.len() - 1) as u32)
    }

    // ── leaves ──────────────────────────────────────────────────────

    pub fn input(&mut self, value: NdArray) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn scalar(&mut self, value: Real) -> NodeId {
        self.push(Op::Input, NdArray::scalar(value))
    }

    /// Bind a trainable parameter; `backward` + `accumulate_param_grads`
    /// will add into its gradient buffer.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(Op::Param(id), params.value(id).clone())
    }

    /// Bind a parameter value as a constant: no gradient ever reaches the
    /// owning `ParamSet` (freeze contract for re-used models).
    pub fn frozen(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(Op::Input, params.value(id).clone())
    }

    // ── elementwise ─────────────────────────────────────────────────

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add: shape {:?} vs {:?}", va.shape(), vb.shape());
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let out = NdArray::new(va.shape().to_vec(), data);
        self.push(Op::Add(a, b), out)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "sub: shape {:?} vs {:?}", va.shape(), vb.shape());
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
        let out = NdArray::new(va.shape().to_vec(), data);
        self.push(Op::Sub(a, b), out)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul: shape {:?} vs {:?}", va.shape(), vb.shape());
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let out = NdArray::new(va.shape().to_vec(), data);
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: NodeId, c: Real) -> NodeId {
        let out = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), out)
    }

    pub fn add_all(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "add_all: empty");
        let mut acc = ids[0];
        for &id in &ids[1..] {
            acc = self.add(acc, id);
        }
        acc
    }

    // ── shape surgery ───────────────────────────────────────────────

    pub fn row(&mut self, a: NodeId, i: usize) -> NodeId {
        let va = self.value(a);
        assert_eq!(va.ndim(), 2, "row: expected 2-D, shape {:?}", va.shape());
        assert!(i < va.rows(), "row: index {i} out of {} rows", va.rows());
        let out = NdArray::vector(va.row(i).to_vec());
        self.push(Op::Row(a, i), out)
    }

    pub fn cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let va = self.value(a);
        let c = va.cols();
        assert!(start + len <= c, "cols: {start}+{len} exceeds {c} columns");
        let out = match va.ndim() {
            1 => NdArray::vector(va.data()[start..start + len].to_vec()),
            2 => {
                let n = va.rows();
                let mut data = Vec::with_capacity(n * len);
                for i in 0..n {
                    data.extend_from_slice(&va.row(i)[start..start + len]);
                }
                NdArray::matrix(n, len, data)
            }
            _ => panic!("cols: expected 1-D or 2-D, shape {:?}", va.shape()),
        };
        self.push(Op::Cols(a, start, len), out)
    }

    pub fn concat1(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat1: empty");
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.ndim(), 1, "concat1: expected 1-D, shape {:?}", v.shape());
            data.extend_from_slice(v.data());
        }
        self.push(Op::Concat1(parts.to_vec()), NdArray::vector(data))
    }

    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows: empty");
        let d = self.value(rows[0]).numel();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let v = self.value(r);
            assert_eq!(v.ndim(), 1, "stack_rows: expected 1-D rows");
            assert_eq!(v.numel(), d, "stack_rows: ragged rows {} vs {d}", v.numel());
            data.extend_from_slice(v.data());
        }
        self.push(Op::StackRows(rows.to_vec()), NdArray::matrix(rows.len(), d, data))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols: empty");
        let n = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                let v = self.value(p);
                assert_eq!(v.ndim(), 2, "concat_cols: expected 2-D");
                assert_eq!(v.rows(), n, "concat_cols: row mismatch {} vs {n}", v.rows());
                data.extend_from_slice(v.row(i));
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), NdArray::matrix(n, total, data))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).transposed();
        self.push(Op::Transpose(a), out)
    }

    // ── linear algebra ──────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ndim(), 2, "matmul: lhs shape {:?}", va.shape());
        assert_eq!(vb.ndim(), 2, "matmul: rhs shape {:?}", vb.shape());
        assert_eq!(
            va.cols(),
            vb.rows(),
            "matmul: inner dims {:?} x {:?}",
            va.shape(),
            vb.shape()
        );
        let (n, k, m) = (va.rows(), va.cols(), vb.cols());
        let mut out = NdArray::zeros(&[n, m]);
        mm_nn_acc(va.data(), vb.data(), out.data_mut(), n, k, m);
        self.push(Op::MatMul(a, b), out)
    }

    /// `a @ b.T` without materializing the transpose.
    pub fn matmul_tb(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ndim(), 2, "matmul_tb: lhs shape {:?}", va.shape());
        assert_eq!(vb.ndim(), 2, "matmul_tb: rhs shape {:?}", vb.shape());
        assert_eq!(
            va.cols(),
            vb.cols(),
            "matmul_tb: inner dims {:?} x {:?}",
            va.shape(),
            vb.shape()
        );
        let (n, k, m) = (va.rows(), va.cols(), vb.rows());
        let mut out = NdArray::zeros(&[n, m]);
        mm_nt_acc(va.data(), vb.data(), out.data_mut(), n, k, m);
        self.push(Op::MatMulTB(a, b), out)
    }

    /// `y = x @ w.T (+ b)`, applied to each row of `x`. 1-D `x` keeps a
    /// 1-D output.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let (vx, vw) = (self.value(x), self.value(w));
        assert_eq!(vw.ndim(), 2, "linear: weight shape {:?}", vw.shape());
        let (o, i) = (vw.rows(), vw.cols());
        assert_eq!(
            vx.cols(),
            i,
            "linear: input {:?} vs weight {:?}",
            vx.shape(),
            vw.shape()
        );
        let n = vx.rows();
        let mut out = vec![0.0; n * o];
        if let Some(b) = b {
            let vb = self.value(b);
            assert_eq!(vb.shape(), [o], "linear: bias {:?} vs out {o}", vb.shape());
            for r in 0..n {
                out[r * o..(r + 1) * o].copy_from_slice(vb.data());
            }
        }
        let vx = self.value(x);
        let vw = self.value(w);
        mm_nt_acc(vx.data(), vw.data(), &mut out, n, i, o);
        let value = if self.value(x).ndim() == 1 {
            NdArray::vector(out)
        } else {
            NdArray::matrix(n, o, out)
        };
        self.push(Op::Linear { x, w, b }, value)
    }

    /// 1-D convolution over time. `x` is `[C_in, T]`, `w` is
    /// `[C_out, C_in, k]`, `b` is `[C_out]`; output `[C_out, T_out]` with
    /// `T_out = (T + 2*padding - k) / stride + 1`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> NodeId {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(vx.ndim(), 2, "conv1d: input shape {:?}", vx.shape());
        assert_eq!(vw.ndim(), 3, "conv1d: weight shape {:?}", vw.shape());
        let (ci, t) = (vx.shape()[0], vx.shape()[1]);
        let (co, wci, k) = (vw.shape()[0], vw.shape()[1], vw.shape()[2]);
        assert_eq!(ci, wci, "conv1d: {ci} input channels vs weight {wci}");
        assert_eq!(vb.shape(), [co], "conv1d: bias {:?} vs {co} channels", vb.shape());
        assert!(t + 2 * padding >= k, "conv1d: length {t} too short for kernel {k} pad {padding}");
        let t_out = (t + 2 * padding - k) / stride + 1;
        let mut out = vec![0.0; co * t_out];
        conv1d_forward(
            vx.data(),
            vw.data(),
            vb.data(),
            &mut out,
            ci,
            t,
            co,
            k,
            stride,
            padding,
            t_out,
        );
        self.push(
            Op::Conv1d { x, w, b, stride, padding },
            NdArray::matrix(co, t_out, out),
        )
    }

    /// Nearest-neighbor upsample by 2 along time: `[C, T] -> [C, 2T]`.
    pub fn upsample2(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        assert_eq!(va.ndim(), 2, "upsample2: shape {:?}", va.shape());
        let (c, t) = (va.shape()[0], va.shape()[1]);
        let mut data = Vec::with_capacity(c * t * 2);
        for ch in 0..c {
            for &v in va.row(ch) {
                data.push(v);
                data.push(v);
            }
        }
        self.push(Op::Upsample2(a), NdArray::matrix(c, 2 * t, data))
    }

    /// Gather rows of an embedding table: `table[V, d]`, ids -> `[n, d]`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let vt = self.value(table);
        assert_eq!(vt.ndim(), 2, "embedding: table shape {:?}", vt.shape());
        let (v, d) = (vt.rows(), vt.cols());
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "embedding: id {id} out of table size {v}");
            data.extend_from_slice(vt.row(id));
        }
        self.push(
            Op::Embedding { table, ids: ids.to_vec() },
            NdArray::matrix(ids.len(), d, data),
        )
    }

    // ── nonlinearities ──────────────────────────────────────────────

    pub fn leaky_relu(&mut self, a: NodeId, slope: Real) -> NodeId {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), out)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| x.tanh());
        self.push(Op::Tanh(a), out)
    }

    /// Row-wise softmax (last axis).
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (n, d) = (va.rows(), va.cols());
        let mut data = vec![0.0; n * d];
        for i in 0..n {
            let row = if va.ndim() == 1 { va.data() } else { va.row(i) };
            softmax_row(row, &mut data[i * d..(i + 1) * d]);
        }
        let out = NdArray::new(va.shape().to_vec(), data);
        self.push(Op::Softmax(a), out)
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let d = vx.cols();
        assert_eq!(vg.shape(), [d], "layer_norm: gain {:?} vs width {d}", vg.shape());
        assert_eq!(vb.shape(), [d], "layer_norm: bias {:?} vs width {d}", vb.shape());
        let n = vx.rows();
        let mut data = vec![0.0; n * d];
        for i in 0..n {
            let row = if vx.ndim() == 1 { vx.data() } else { vx.row(i) };
            let (mu, inv) = row_moments(row);
            let out = &mut data[i * d..(i + 1) * d];
            for j in 0..d {
                out[j] = (row[j] - mu) * inv * vg.data()[j] + vb.data()[j];
            }
        }
        let out = NdArray::new(vx.shape().to_vec(), data);
        self.push(Op::LayerNorm { x, gain, bias }, out)
    }

    // ── special gradient paths ──────────────────────────────────────

    /// Forward value of `quantized`; backward copies the upstream gradient
    /// to `continuous` unchanged and contributes nothing to `quantized`.
    pub fn straight_through(&mut self, continuous: NodeId, quantized: NodeId) -> NodeId {
        let (vc, vq) = (self.value(continuous), self.value(quantized));
        assert_eq!(
            vc.shape(),
            vq.shape(),
            "straight_through: shape {:?} vs {:?}",
            vc.shape(),
            vq.shape()
        );
        let out = vq.clone();
        self.push(Op::StraightThrough { continuous }, out)
    }

    /// Differentiable relaxation of categorical sampling over the last
    /// axis: `softmax((logits + gumbel_noise) / tau)`. The output lies on
    /// the probability simplex for every `tau > 0` and concentrates on one
    /// coordinate as `tau -> 0`.
    pub fn gumbel_softmax(&mut self, logits: NodeId, tau: Real, rng: &mut Rng) -> NodeId {
        assert!(tau > 0.0, "gumbel_softmax: temperature must be positive, got {tau}");
        let shape = self.value(logits).shape().to_vec();
        let numel: usize = shape.iter().product();
        let noise: Vec<Real> = (0..numel)
            .map(|_| {
                let u: Real = rng.random::<Real>().clamp(1e-12, 1.0 - 1e-12);
                -(-u.ln()).ln()
            })
            .collect();
        let noise = self.input(NdArray::new(shape, noise));
        let shifted = self.add(logits, noise);
        let scaled = self.scale(shifted, 1.0 / tau);
        self.softmax(scaled)
    }

    // ── losses and reductions ───────────────────────────────────────

    /// Negative log-likelihood of integer targets under row logits.
    /// Targets of `-1` are ignored (padding); `Mean` divides by the number
    /// of non-ignored rows.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[i64], reduction: Reduction) -> NodeId {
        let vl = self.value(logits);
        let (n, v) = (vl.rows(), vl.cols());
        assert_eq!(targets.len(), n, "cross_entropy: {} targets for {n} rows", targets.len());
        let mut total = 0.0;
        let mut n_valid = 0usize;
        for (i, &t) in targets.iter().enumerate() {
            if t < 0 {
                continue;
            }
            assert!((t as usize) < v, "cross_entropy: target {t} out of {v} classes");
            let row = if vl.ndim() == 1 { vl.data() } else { vl.row(i) };
            total += log_sum_exp(row) - row[t as usize];
            n_valid += 1;
        }
        assert!(n_valid > 0, "cross_entropy: all targets ignored");
        let value = match reduction {
            Reduction::Mean => total / n_valid as Real,
            Reduction::Sum => total,
        };
        self.push(
            Op::CrossEntropy { logits, targets: targets.to_vec(), reduction },
            NdArray::scalar(value),
        )
    }

    /// Mean absolute error.
    pub fn l1_loss(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "l1_loss: shape {:?} vs {:?}", va.shape(), vb.shape());
        let n = va.numel() as Real;
        let total: Real = va.data().iter().zip(vb.data()).map(|(x, y)| (x - y).abs()).sum();
        self.push(Op::L1Loss(a, b), NdArray::scalar(total / n))
    }

    /// Mean squared error.
    pub fn mse_loss(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mse_loss: shape {:?} vs {:?}", va.shape(), vb.shape());
        let n = va.numel() as Real;
        let total: Real = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(Op::MseLoss(a, b), NdArray::scalar(total / n))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: Real = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), NdArray::scalar(total))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let total: Real = va.data().iter().sum();
        let n = va.numel() as Real;
        self.push(Op::Mean(a), NdArray::scalar(total / n))
    }

    // ── backward ────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Populates per-node gradients
    /// (readable via [`grad`](Self::grad)); call
    /// [`accumulate_param_grads`](Self::accumulate_param_grads) afterwards
    /// to fold leaf gradients into a `ParamSet`.
    pub fn backward(&mut self, loss: NodeId) {
        assert!(
            self.value(loss).is_scalar(),
            "backward: loss must be scalar, shape {:?}",
            self.value(loss).shape()
        );
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.idx()] = Some(NdArray::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            if matches!(self.nodes[i].op, Op::Input | Op::Param(_)) {
                continue;
            }
            let Some(gy) = self.grads[i].take() else { continue };
            self.backprop_node(i, &gy);
        }
    }

    /// Add each `Param` leaf's gradient into its parameter buffer.
    pub fn accumulate_param_grads(&self, params: &mut ParamSet) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(pid) = node.op {
                if let Some(g) = self.grads.get(i).and_then(|g| g.as_ref()) {
                    let buf = params.get_mut(pid);
                    debug_assert_eq!(buf.grad.shape(), g.shape());
                    for (dst, src) in buf.grad.data_mut().iter_mut().zip(g.data()) {
                        *dst += src;
                    }
                }
            }
        }
    }

    fn grad_buf(&mut self, id: NodeId) -> &mut NdArray {
        let shape = self.nodes[id.idx()].value.shape().to_vec();
        self.grads[id.idx()].get_or_insert_with(|| NdArray::zeros(&shape))
    }

    fn backprop_node(&mut self, i: usize, gy: &NdArray) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Input | Op::Param(_) => unreachable!(),
            Op::Add(a, b) => {
                acc_eq(self.grad_buf(a), gy.data(), 1.0);
                acc_eq(self.grad_buf(b), gy.data(), 1.0);
            }
            Op::Sub(a, b) => {
                acc_eq(self.grad_buf(a), gy.data(), 1.0);
                acc_eq(self.grad_buf(b), gy.data(), -1.0);
            }
            Op::Mul(a, b) => {
                let vb = self.nodes[b.idx()].value.data().to_vec();
                let va = self.nodes[a.idx()].value.data().to_vec();
                acc_prod(self.grad_buf(a), gy.data(), &vb);
                acc_prod(self.grad_buf(b), gy.data(), &va);
            }
            Op::Scale(a, c) => acc_eq(self.grad_buf(a), gy.data(), c),
            Op::Row(a, r) => {
                let cols = gy.numel();
                let ga = self.grad_buf(a);
                let dst = &mut ga.data_mut()[r * cols..(r + 1) * cols];
                for (d, s) in dst.iter_mut().zip(gy.data()) {
                    *d += s;
                }
            }
            Op::Cols(a, start, len) => {
                let ndim = self.nodes[a.idx()].value.ndim();
                let total = self.nodes[a.idx()].value.cols();
                let n = gy.rows();
                let ga = self.grad_buf(a);
                if ndim == 1 {
                    let dst = &mut ga.data_mut()[start..start + len];
                    for (d, s) in dst.iter_mut().zip(gy.data()) {
                        *d += s;
                    }
                } else {
                    for r in 0..n {
                        let dst = &mut ga.data_mut()[r * total + start..r * total + start + len];
                        for (d, s) in dst.iter_mut().zip(&gy.data()[r * len..(r + 1) * len]) {
                            *d += s;
                        }
                    }
                }
            }
            Op::Concat1(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.idx()].value.numel();
                    let gp = self.grad_buf(p);
                    for (d, s) in gp.data_mut().iter_mut().zip(&gy.data()[off..off + len]) {
                        *d += s;
                    }
                    off += len;
                }
            }
            Op::StackRows(rows) => {
                let d = gy.cols();
                for (r, part) in rows.into_iter().enumerate() {
                    let gp = self.grad_buf(part);
                    for (dst, src) in gp.data_mut().iter_mut().zip(&gy.data()[r * d..(r + 1) * d]) {
                        *dst += src;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let n = gy.rows();
                let total = gy.cols();
                let mut off = 0;
                for p in parts {
                    let w = self.nodes[p.idx()].value.cols();
                    let gp = self.grad_buf(p);
                    for r in 0..n {
                        let dst = &mut gp.data_mut()[r * w..(r + 1) * w];
                        let src = &gy.data()[r * total + off..r * total + off + w];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    off += w;
                }
            }
            Op::Transpose(a) => {
                let gt = gy.transposed();
                acc_eq(self.grad_buf(a), gt.data(), 1.0);
            }
            Op::MatMul(a, b) => {
                let va = self.nodes[a.idx()].value.clone();
                let vb = self.nodes[b.idx()].value.clone();
                let (n, k, m) = (va.rows(), va.cols(), vb.cols());
                mm_nt_acc(gy.data(), vb.data(), self.grad_buf(a).data_mut(), n, m, k);
                mm_tn_acc(va.data(), gy.data(), self.grad_buf(b).data_mut(), n, k, m);
            }
            Op::MatMulTB(a, b) => {
                let va = self.nodes[a.idx()].value.clone();
                let vb = self.nodes[b.idx()].value.clone();
                let (n, k, m) = (va.rows(), va.cols(), vb.rows());
                mm_nn_acc(gy.data(), vb.data(), self.grad_buf(a).data_mut(), n, m, k);
                mm_tn_acc(gy.data(), va.data(), self.grad_buf(b).data_mut(), n, m, k);
            }
            Op::Linear { x, w, b } => {
                let vx = self.nodes[x.idx()].value.clone();
                let vw = self.nodes[w.idx()].value.clone();
                let (n, i_dim, o) = (vx.rows(), vx.cols(), vw.rows());
                mm_nn_acc(gy.data(), vw.data(), self.grad_buf(x).data_mut(), n, o, i_dim);
                mm_tn_acc(gy.data(), vx.data(), self.grad_buf(w).data_mut(), n, o, i_dim);
                if let Some(b) = b {
                    let gb = self.grad_buf(b);
                    for r in 0..n {
                        for (d, s) in gb.data_mut().iter_mut().zip(&gy.data()[r * o..(r + 1) * o]) {
                            *d += s;
                        }
                    }
                }
            }
            Op::Conv1d { x, w, b, stride, padding } => {
                let vx = self.nodes[x.idx()].value.clone();
                let vw = self.nodes[w.idx()].value.clone();
                let (ci, t) = (vx.shape()[0], vx.shape()[1]);
                let (co, k) = (vw.shape()[0], vw.shape()[2]);
                let t_out = gy.cols();
                conv1d_backward(
                    vx.data(),
                    vw.data(),
                    gy.data(),
                    self.grad_buf(x).data_mut(),
                    ci,
                    t,
                    co,
                    k,
                    stride,
                    padding,
                    t_out,
                    GradTarget::Input,
                );
                conv1d_backward(
                    vx.data(),
                    vw.data(),
                    gy.data(),
                    self.grad_buf(w).data_mut(),
                    ci,
                    t,
                    co,
                    k,
                    stride,
                    padding,
                    t_out,
                    GradTarget::Weight,
                );
                let gb = self.grad_buf(b);
                for o in 0..co {
                    let s: Real = gy.data()[o * t_out..(o + 1) * t_out].iter().sum();
                    gb.data_mut()[o] += s;
                }
            }
            Op::Upsample2(a) => {
                let (c, t2) = (gy.shape()[0], gy.shape()[1]);
                let t = t2 / 2;
                let ga = self.grad_buf(a);
                for ch in 0..c {
                    for j in 0..t {
                        ga.data_mut()[ch * t + j] +=
                            gy.data()[ch * t2 + 2 * j] + gy.data()[ch * t2 + 2 * j + 1];
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = gy.cols();
                let gt = self.grad_buf(table);
                for (r, id) in ids.into_iter().enumerate() {
                    let dst = &mut gt.data_mut()[id * d..(id + 1) * d];
                    for (dd, s) in dst.iter_mut().zip(&gy.data()[r * d..(r + 1) * d]) {
                        *dd += s;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                let va = self.nodes[a.idx()].value.data().to_vec();
                let ga = self.grad_buf(a);
                for ((d, s), x) in ga.data_mut().iter_mut().zip(gy.data()).zip(&va) {
                    *d += s * if *x > 0.0 { 1.0 } else { slope };
                }
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.data().to_vec();
                let ga = self.grad_buf(a);
                for ((d, s), y) in ga.data_mut().iter_mut().zip(gy.data()).zip(&y) {
                    *d += s * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let y = self.nodes[i].value.data().to_vec();
                let ga = self.grad_buf(a);
                for ((d, s), y) in ga.data_mut().iter_mut().zip(gy.data()).zip(&y) {
                    *d += s * (1.0 - y * y);
                }
            }
            Op::Softmax(a) => {
                let y = self.nodes[i].value.clone();
                let (n, d) = (y.rows(), y.cols());
                let ga = self.grad_buf(a);
                for r in 0..n {
                    let yr = &y.data()[r * d..(r + 1) * d];
                    let gr = &gy.data()[r * d..(r + 1) * d];
                    let dot: Real = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    let dst = &mut ga.data_mut()[r * d..(r + 1) * d];
                    for j in 0..d {
                        dst[j] += yr[j] * (gr[j] - dot);
                    }
                }
            }
            Op::LayerNorm { x, gain, bias } => {
                let vx = self.nodes[x.idx()].value.clone();
                let vg = self.nodes[gain.idx()].value.clone();
                let (n, d) = (vx.rows(), vx.cols());
                for r in 0..n {
                    let row = if vx.ndim() == 1 { vx.data() } else { vx.row(r) };
                    let (mu, inv) = row_moments(row);
                    let gr = &gy.data()[r * d..(r + 1) * d];
                    let xhat: Vec<Real> = row.iter().map(|&v| (v - mu) * inv).collect();
                    {
                        let gg = self.grad_buf(gain);
                        for j in 0..d {
                            gg.data_mut()[j] += gr[j] * xhat[j];
                        }
                    }
                    {
                        let gb = self.grad_buf(bias);
                        for j in 0..d {
                            gb.data_mut()[j] += gr[j];
                        }
                    }
                    let dxhat: Vec<Real> = (0..d).map(|j| gr[j] * vg.data()[j]).collect();
                    let mean_dxhat: Real = dxhat.iter().sum::<Real>() / d as Real;
                    let mean_dxhat_xhat: Real =
                        dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<Real>() / d as Real;
                    let gx = self.grad_buf(x);
                    let dst = &mut gx.data_mut()[r * d..(r + 1) * d];
                    for j in 0..d {
                        dst[j] += inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    }
                }
            }
            Op::StraightThrough { continuous } => {
                acc_eq(self.grad_buf(continuous), gy.data(), 1.0);
            }
            Op::CrossEntropy { logits, targets, reduction } => {
                let vl = self.nodes[logits.idx()].value.clone();
                let (n, v) = (vl.rows(), vl.cols());
                let n_valid = targets.iter().filter(|&&t| t >= 0).count();
                let scale = gy.scalar_value()
                    * match reduction {
                        Reduction::Mean => 1.0 / n_valid as Real,
                        Reduction::Sum => 1.0,
                    };
                let gl = self.grad_buf(logits);
                let mut probs = vec![0.0; v];
                for (r, &t) in targets.iter().enumerate().take(n) {
                    if t < 0 {
                        continue;
                    }
                    let row = if vl.ndim() == 1 { vl.data() } else { vl.row(r) };
                    softmax_row(row, &mut probs);
                    let dst = &mut gl.data_mut()[r * v..(r + 1) * v];
                    for j in 0..v {
                        let indicator = if j == t as usize { 1.0 } else { 0.0 };
                        dst[j] += scale * (probs[j] - indicator);
                    }
                }
            }
            Op::L1Loss(a, b) => {
                let va = self.nodes[a.idx()].value.clone();
                let vb = self.nodes[b.idx()].value.clone();
                let scale = gy.scalar_value() / va.numel() as Real;
                {
                    let ga = self.grad_buf(a);
                    for (d, (x, y)) in ga.data_mut().iter_mut().zip(va.data().iter().zip(vb.data())) {
                        *d += scale * sign(x - y);
                    }
                }
                let gb = self.grad_buf(b);
                for (d, (x, y)) in gb.data_mut().iter_mut().zip(va.data().iter().zip(vb.data())) {
                    *d -= scale * sign(x - y);
                }
            }
            Op::MseLoss(a, b) => {
                let va = self.nodes[a.idx()].value.clone();
                let vb = self.nodes[b.idx()].value.clone();
                let scale = 2.0 * gy.scalar_value() / va.numel() as Real;
                {
                    let ga = self.grad_buf(a);
                    for (d, (x, y)) in ga.data_mut().iter_mut().zip(va.data().iter().zip(vb.data())) {
                        *d += scale * (x - y);
                    }
                }
                let gb = self.grad_buf(b);
                for (d, (x, y)) in gb.data_mut().iter_mut().zip(va.data().iter().zip(vb.data())) {
                    *d -= scale * (x - y);
                }
            }
            Op::Sum(a) => {
                let g = gy.scalar_value();
                acc_const(self.grad_buf(a), g);
            }
            Op::Mean(a) => {
                let n = self.nodes[a.idx()].value.numel() as Real;
                let g = gy.scalar_value() / n;
                acc_const(self.grad_buf(a), g);
            }
        }
    }
}

fn sign(x: Real) -> Real {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn acc_eq(dst: &mut NdArray, src: &[Real], c: Real) {
    debug_assert_eq!(dst.numel(), src.len());
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += c * s;
    }
}

fn acc_prod(dst: &mut NdArray, gy: &[Real], other: &[Real]) {
    for ((d, g), o) in dst.data_mut().iter_mut().zip(gy).zip(other) {
        *d += g * o;
    }
}

fn acc_const(dst: &mut NdArray, c: Real) {
    for d in dst.data_mut().iter_mut() {
        *d += c;
    }
}

fn softmax_row(row: &[Real], out: &mut [Real]) {
    let m = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        let e = (x - m).exp();
        *o = e;
        sum += e;
    }
    let inv = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

fn log_sum_exp(row: &[Real]) -> Real {
    let m = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    m + row.iter().map(|&x| (x - m).exp()).sum::<Real>().ln()
}

fn row_moments(row: &[Real]) -> (Real, Real) {
    let d = row.len() as Real;
    let mu = row.iter().sum::<Real>() / d;
    let var = row.iter().map(|&x| (x - mu) * (x - mu)).sum::<Real>() / d;
    (mu, 1.0 / (var + LAYER_NORM_EPS).sqrt())
}

/// c[n,m] += a[n,k] @ b[k,m]
fn mm_nn_acc(a: &[Real], b: &[Real], c: &mut [Real], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * m..(i + 1) * m];
        for (l, &a_il) in arow.iter().enumerate() {
            if a_il == 0.0 {
                continue;
            }
            let brow = &b[l * m..(l + 1) * m];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += a_il * bv;
            }
        }
    }
}

/// c[n,m] += a[n,k] @ b[m,k].T
fn mm_nt_acc(a: &[Real], b: &[Real], c: &mut [Real], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * m..(i + 1) * m];
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                s += av * bv;
            }
            *cv += s;
        }
    }
}

/// c[k,m] += a[n,k].T @ b[n,m]
fn mm_tn_acc(a: &[Real], b: &[Real], c: &mut [Real], n: usize, k: usize, m: usize) {
    for l in 0..n {
        let arow = &a[l * k..(l + 1) * k];
        let brow = &b[l * m..(l + 1) * m];
        for (i, &a_li) in arow.iter().enumerate() {
            if a_li == 0.0 {
                continue;
            }
            let crow = &mut c[i * m..(i + 1) * m];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += a_li * bv;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv1d_forward(
    x: &[Real],
    w: &[Real],
    b: &[Real],
    out: &mut [Real],
    ci: usize,
    t: usize,
    co: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
) {
    for o in 0..co {
        let orow = &mut out[o * t_out..(o + 1) * t_out];
        orow.fill(b[o]);
        for c in 0..ci {
            let xrow = &x[c * t..(c + 1) * t];
            let wbase = (o * ci + c) * k;
            for q in 0..k {
                let wv = w[wbase + q];
                let (j_lo, j_hi) = conv_range(t, k, stride, padding, q, t_out);
                for j in j_lo..j_hi {
                    let pos = j * stride + q - padding;
                    orow[j] += wv * xrow[pos];
                }
            }
        }
    }
}

enum GradTarget {
    Input,
    Weight,
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &[Real],
    w: &[Real],
    gy: &[Real],
    gout: &mut [Real],
    ci: usize,
    t: usize,
    co: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
    target: GradTarget,
) {
    for o in 0..co {
        let grow = &gy[o * t_out..(o + 1) * t_out];
        for c in 0..ci {
            let wbase = (o * ci + c) * k;
            for q in 0..k {
                let (j_lo, j_hi) = conv_range(t, k, stride, padding, q, t_out);
                match target {
                    GradTarget::Input => {
                        let wv = w[wbase + q];
                        if wv == 0.0 {
                            continue;
                        }
                        for j in j_lo..j_hi {
                            let pos = j * stride + q - padding;
                            gout[c * t + pos] += wv * grow[j];
                        }
                    }
                    GradTarget::Weight => {
                        let xrow = &x[c * t..(c + 1) * t];
                        let mut s = 0.0;
                        for j in j_lo..j_hi {
                            let pos = j * stride + q - padding;
                            s += xrow[pos] * grow[j];
                        }
                        gout[wbase + q] += s;
                    }
                }
            }
        }
    }
}

/// Output positions `j` for which `j*stride + q - padding` lands in `[0, t)`.
fn conv_range(t: usize, _k: usize, stride: usize, padding: usize, q: usize, t_out: usize) -> (usize, usize) {
    let j_lo = if q >= padding { 0 } else { (padding - q).div_ceil(stride) };
    let j_hi = if t + padding > q {
        (((t + padding - q - 1) / stride) + 1).min(t_out)
    } else {
        0
    };
    (j_lo.min(j_hi), j_hi)
}
