//! Layers built from tape ops. Each layer owns `ParamId`s inside some
//! `ParamSet`; `bind` pins the current values into a graph once, after
//! which the bound handle can be applied any number of times without
//! re-cloning weights.

use rand::Rng as _;

use crate::diff::params::{init_he_uniform, init_normal, init_orthogonal};
use crate::diff::{Graph, NdArray, NodeId, ParamId, ParamSet, Real};
use crate::util::Rng;

pub const LEAKY_SLOPE: Real = 0.2;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, bias: bool, rng: &mut Rng) -> Self {
        let w = ps.add(&format!("{name}.weight"), init_he_uniform(&[out_dim, in_dim], in_dim, rng));
        let b = bias.then(|| ps.add(&format!("{name}.bias"), NdArray::zeros(&[out_dim])));
        Linear { w, b }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundLinear {
        let w = if frozen { g.frozen(ps, self.w) } else { g.param(ps, self.w) };
        let b = self.b.map(|b| if frozen { g.frozen(ps, b) } else { g.param(ps, b) });
        BoundLinear { w, b }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub w: NodeId,
    pub b: Option<NodeId>,
}

impl BoundLinear {
    pub fn apply(&self, g: &mut Graph, x: NodeId) -> NodeId {
        g.linear(x, self.w, self.b)
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> Self {
        let w = ps.add(
            &format!("{name}.weight"),
            init_he_uniform(&[out_ch, in_ch, kernel], in_ch * kernel, rng),
        );
        let b = ps.add(&format!("{name}.bias"), NdArray::zeros(&[out_ch]));
        Conv1d { w, b, stride, padding }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundConv1d {
        let w = if frozen { g.frozen(ps, self.w) } else { g.param(ps, self.w) };
        let b = if frozen { g.frozen(ps, self.b) } else { g.param(ps, self.b) };
        BoundConv1d { w, b, stride: self.stride, padding: self.padding }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundConv1d {
    pub w: NodeId,
    pub b: NodeId,
    stride: usize,
    padding: usize,
}

impl BoundConv1d {
    pub fn apply(&self, g: &mut Graph, x: NodeId) -> NodeId {
        g.conv1d(x, self.w, self.b, self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(ps: &mut ParamSet, name: &str, vocab: usize, dim: usize, rng: &mut Rng) -> Self {
        let table = ps.add(&format!("{name}.table"), init_normal(&[vocab, dim], 0.02, rng));
        Embedding { table, dim }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundEmbedding {
        let table = if frozen { g.frozen(ps, self.table) } else { g.param(ps, self.table) };
        BoundEmbedding { table }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundEmbedding {
    pub table: NodeId,
}

impl BoundEmbedding {
    pub fn lookup(&self, g: &mut Graph, ids: &[usize]) -> NodeId {
        g.embedding(self.table, ids)
    }

    /// Rows are simplex weights over the vocabulary; the result is the
    /// weighted mixture of embedding rows (reduces to `lookup` for one-hot
    /// weights).
    pub fn soft(&self, g: &mut Graph, weights: NodeId) -> NodeId {
        g.matmul(weights, self.table)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamSet, name: &str, dim: usize) -> Self {
        let gain = ps.add(&format!("{name}.gain"), NdArray::filled(&[dim], 1.0));
        let bias = ps.add(&format!("{name}.bias"), NdArray::zeros(&[dim]));
        LayerNorm { gain, bias }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundLayerNorm {
        let gain = if frozen { g.frozen(ps, self.gain) } else { g.param(ps, self.gain) };
        let bias = if frozen { g.frozen(ps, self.bias) } else { g.param(ps, self.bias) };
        BoundLayerNorm { gain, bias }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLayerNorm {
    gain: NodeId,
    bias: NodeId,
}

impl BoundLayerNorm {
    pub fn apply(&self, g: &mut Graph, x: NodeId) -> NodeId {
        g.layer_norm(x, self.gain, self.bias)
    }
}

/// Gated recurrent unit cell with packed gate weights (reset, update,
/// candidate). Recurrent blocks start orthogonal.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w_ih = ps.add(
            &format!("{name}.w_ih"),
            init_he_uniform(&[3 * hidden, input], input, rng),
        );
        let mut hh = NdArray::zeros(&[3 * hidden, hidden]);
        for gate in 0..3 {
            let q = init_orthogonal(hidden, rng);
            let dst = &mut hh.data_mut()[gate * hidden * hidden..(gate + 1) * hidden * hidden];
            dst.copy_from_slice(q.data());
        }
        let w_hh = ps.add(&format!("{name}.w_hh"), hh);
        let b_ih = ps.add(&format!("{name}.b_ih"), NdArray::zeros(&[3 * hidden]));
        let b_hh = ps.add(&format!("{name}.b_hh"), NdArray::zeros(&[3 * hidden]));
        GruCell { w_ih, w_hh, b_ih, b_hh, hidden }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundGruCell {
        let f = |g: &mut Graph, id: ParamId| if frozen { g.frozen(ps, id) } else { g.param(ps, id) };
        BoundGruCell {
            w_ih: f(g, self.w_ih),
            w_hh: f(g, self.w_hh),
            b_ih: f(g, self.b_ih),
            b_hh: f(g, self.b_hh),
            hidden: self.hidden,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundGruCell {
    w_ih: NodeId,
    w_hh: NodeId,
    b_ih: NodeId,
    b_hh: NodeId,
    pub hidden: usize,
}

impl BoundGruCell {
    /// One step: `x` is `[input]`, `h` is `[hidden]`; returns the new
    /// hidden state.
    pub fn step(&self, g: &mut Graph, x: NodeId, h: NodeId) -> NodeId {
        let d = self.hidden;
        let gx = g.linear(x, self.w_ih, Some(self.b_ih));
        let gh = g.linear(h, self.w_hh, Some(self.b_hh));
        let rx = g.cols(gx, 0, d);
        let rh = g.cols(gh, 0, d);
        let r_sum = g.add(rx, rh);
        let r = g.sigmoid(r_sum);
        let zx = g.cols(gx, d, d);
        let zh = g.cols(gh, d, d);
        let z_sum = g.add(zx, zh);
        let z = g.sigmoid(z_sum);
        let nx = g.cols(gx, 2 * d, d);
        let nh = g.cols(gh, 2 * d, d);
        let rn = g.mul(r, nh);
        let n_sum = g.add(nx, rn);
        let n = g.tanh(n_sum);
        // h' = n + z * (h - n)
        let hn = g.sub(h, n);
        let zhn = g.mul(z, hn);
        g.add(n, zhn)
    }
}

/// Bi-directional single-layer GRU over a sequence of row vectors.
/// Returns per-position concatenated states `[n, 2h]` and the
/// concatenated final states `[2h]`.
#[derive(Debug, Clone)]
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl BiGru {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiGru {
            fwd: GruCell::new(ps, &format!("{name}.fwd"), input, hidden, rng),
            bwd: GruCell::new(ps, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundBiGru {
        BoundBiGru { fwd: self.fwd.bind(g, ps, frozen), bwd: self.bwd.bind(g, ps, frozen) }
    }
}

pub struct BoundBiGru {
    fwd: BoundGruCell,
    bwd: BoundGruCell,
}

impl BoundBiGru {
    pub fn run(&self, g: &mut Graph, inputs: &[NodeId]) -> (NodeId, NodeId) {
        assert!(!inputs.is_empty(), "BiGru: empty sequence");
        let h = self.fwd.hidden;
        let zeros = g.input(NdArray::zeros(&[h]));
        let mut hf = zeros;
        let mut fwd_states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            hf = self.fwd.step(g, x, hf);
            fwd_states.push(hf);
        }
        let zeros = g.input(NdArray::zeros(&[h]));
        let mut hb = zeros;
        let mut bwd_states = vec![zeros; inputs.len()];
        for (i, &x) in inputs.iter().enumerate().rev() {
            hb = self.bwd.step(g, x, hb);
            bwd_states[i] = hb;
        }
        let per_pos: Vec<NodeId> = (0..inputs.len())
            .map(|i| g.concat1(&[fwd_states[i], bwd_states[i]]))
            .collect();
        let word_matrix = g.stack_rows(&per_pos);
        let sentence = g.concat1(&[*fwd_states.last().unwrap(), bwd_states[0]]);
        (word_matrix, sentence)
    }
}

/// Fixed sinusoidal positional encodings, one row per position.
pub fn sinusoidal_positions(n: usize, d: usize) -> NdArray {
    let mut data = vec![0.0; n * d];
    for pos in 0..n {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as Real / d as Real;
            let angle = pos as Real / (10_000.0 as Real).powf(exponent);
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    NdArray::matrix(n, d, data)
}

/// Inverted dropout as a constant mask; identity when not training.
pub fn dropout(g: &mut Graph, x: NodeId, p: Real, train: bool, rng: &mut Rng) -> NodeId {
    if !train || p <= 0.0 {
        return x;
    }
    let shape = g.value(x).shape().to_vec();
    let numel: usize = shape.iter().product();
    let keep = 1.0 - p;
    let mask: Vec<Real> = (0..numel)
        .map(|_| if rng.random::<Real>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let mask = g.input(NdArray::new(shape, mask));
    g.mul(x, mask)
}

/// Additive attention mask: `0` where attending is allowed, a large
/// negative number where blocked.
pub fn attention_mask(rows: usize, cols: usize, blocked: impl Fn(usize, usize) -> bool) -> NdArray {
    let mut data = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            if blocked(i, j) {
                data[i * cols + j] = -1e30;
            }
        }
    }
    NdArray::matrix(rows, cols, data)
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(ps: &mut ParamSet, name: &str, dim: usize, heads: usize, rng: &mut Rng) -> Self {
        assert_eq!(dim % heads, 0, "attention dim {dim} not divisible by {heads} heads");
        MultiHeadAttention {
            wq: Linear::new(ps, &format!("{name}.wq"), dim, dim, true, rng),
            wk: Linear::new(ps, &format!("{name}.wk"), dim, dim, true, rng),
            wv: Linear::new(ps, &format!("{name}.wv"), dim, dim, true, rng),
            wo: Linear::new(ps, &format!("{name}.wo"), dim, dim, true, rng),
            heads,
            dim,
        }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundMha {
        BoundMha {
            wq: self.wq.bind(g, ps, frozen),
            wk: self.wk.bind(g, ps, frozen),
            wv: self.wv.bind(g, ps, frozen),
            wo: self.wo.bind(g, ps, frozen),
            heads: self.heads,
            dim: self.dim,
        }
    }
}

pub struct BoundMha {
    wq: BoundLinear,
    wk: BoundLinear,
    wv: BoundLinear,
    wo: BoundLinear,
    heads: usize,
    dim: usize,
}

impl BoundMha {
    /// Scaled dot-product attention of `queries` `[n, d]` over `keys`
    /// `[m, d]`; optional additive mask `[n, m]`.
    pub fn apply(&self, g: &mut Graph, queries: NodeId, keys: NodeId, mask: Option<NodeId>) -> NodeId {
        let dh = self.dim / self.heads;
        let q = self.wq.apply(g, queries);
        let k = self.wk.apply(g, keys);
        let v = self.wv.apply(g, keys);
        let scale = 1.0 / (dh as Real).sqrt();
        let mut head_outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.cols(q, h * dh, dh);
            let kh = g.cols(k, h * dh, dh);
            let vh = g.cols(v, h * dh, dh);
            let scores = g.matmul_tb(qh, kh);
            let mut scores = g.scale(scores, scale);
            if let Some(m) = mask {
                scores = g.add(scores, m);
            }
            let attn = g.softmax(scores);
            head_outs.push(g.matmul(attn, vh));
        }
        let ctx = g.concat_cols(&head_outs);
        self.wo.apply(g, ctx)
    }
}
