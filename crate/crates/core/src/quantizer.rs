//! Vector-quantized motion autoencoder: compresses a pose sequence into
//! discrete codebook indices (motion tokens) via two stride-2
//! convolutions, and reconstructs poses from tokens. One token covers a
//! 4-frame motion segment.
//!
//! Foot-contact channels are predicted by the decoder and scored in the
//! reconstruction loss but never fed to the encoder. All pose data here
//! is in normalized feature space.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{NormStats, PoseSequence};
use crate::diff::{Checkpoint, Graph, NdArray, NodeId, ParamId, ParamSet, Real};
use crate::error::{Error, Result};
use crate::nn::{BoundConv1d, Conv1d, LEAKY_SLOPE};
use crate::tokens::MotionTokenSequence;
use crate::util::{derive_seed, rng_from_seed, Rng};

pub const FRAMES_PER_TOKEN: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuantizerConfig {
    /// Full pose channel count D_p (decoder output width).
    pub channels: usize,
    /// Conv width of the outer encoder/decoder stages.
    pub hidden: usize,
    /// Codebook entry dimension d (also the inner conv width).
    pub code_dim: usize,
    /// Codebook size K.
    pub codebook_size: usize,
    /// Commitment loss weight.
    pub beta: Real,
    /// Re-seed codebook entries unused for this many consecutive steps
    /// (0 disables).
    pub dead_code_steps: usize,
}

impl QuantizerConfig {
    pub fn desk(channels: usize) -> Self {
        QuantizerConfig {
            channels,
            hidden: 64,
            code_dim: 32,
            codebook_size: 64,
            beta: 1.0,
            dead_code_steps: 256,
        }
    }

    pub fn paper_scale(channels: usize) -> Self {
        QuantizerConfig {
            channels,
            hidden: 1024,
            code_dim: 1024,
            codebook_size: 1024,
            beta: 1.0,
            dead_code_steps: 256,
        }
    }

    pub fn encoder_channels(&self) -> usize {
        self.channels - 4
    }
}

/// Encoder output rows: `t = floor(T/4)` rows of dimension `code_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub rows: NdArray, // [t, d]
}

impl LatentSequence {
    pub fn len(&self) -> usize {
        self.rows.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.shape()[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqLossReport {
    pub reconstruction: Real,
    pub codebook_term: Real,
    pub commitment_term: Real,
    pub beta: Real,
}

impl VqLossReport {
    pub fn total(&self) -> Real {
        self.reconstruction + self.codebook_term + self.beta * self.commitment_term
    }
}

struct ResBlock {
    conv_a: Conv1d,
    conv_b: Conv1d,
}

impl ResBlock {
    fn new(ps: &mut ParamSet, name: &str, ch: usize, rng: &mut Rng) -> Self {
        ResBlock {
            conv_a: Conv1d::new(ps, &format!("{name}.a"), ch, ch, 3, 1, 1, rng),
            conv_b: Conv1d::new(ps, &format!("{name}.b"), ch, ch, 3, 1, 1, rng),
        }
    }

    fn bind(&self, g: &mut Graph, ps: &ParamSet, frozen: bool) -> BoundResBlock {
        BoundResBlock {
            conv_a: self.conv_a.bind(g, ps, frozen),
            conv_b: self.conv_b.bind(g, ps, frozen),
        }
    }
}

struct BoundResBlock {
    conv_a: BoundConv1d,
    conv_b: BoundConv1d,
}

impl BoundResBlock {
    fn apply(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let h = self.conv_a.apply(g, x);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        let h = self.conv_b.apply(g, h);
        g.add(x, h)
    }
}

pub struct MotionQuantizer {
    pub config: QuantizerConfig,
    pub params: ParamSet,
    enc_conv1: Conv1d,
    enc_res1: ResBlock,
    enc_conv2: Conv1d,
    enc_res2: ResBlock,
    dec_res1: ResBlock,
    dec_res2: ResBlock,
    dec_conv1: Conv1d,
    dec_conv2: Conv1d,
    dec_conv3: Conv1d,
    codebook: ParamId,
    /// Lifetime hit counts per entry.
    pub usage_counts: Vec<u64>,
    /// Steps since each entry was last selected (dead-code tracking).
    steps_since_use: Vec<u64>,
    codebook_initialized: bool,
    pub trained: bool,
}

impl MotionQuantizer {
    pub fn new(config: QuantizerConfig, seed: u64) -> Self {
        assert!(config.codebook_size >= 2, "codebook needs at least 2 entries");
        assert!(config.channels > 4, "pose layout must include contact channels");
        let mut rng = rng_from_seed(seed);
        let mut ps = ParamSet::new();
        let d_in = config.encoder_channels();
        let (h, d, dp) = (config.hidden, config.code_dim, config.channels);
        let enc_conv1 = Conv1d::new(&mut ps, "enc.conv1", d_in, h, 4, 2, 1, &mut rng);
        let enc_res1 = ResBlock::new(&mut ps, "enc.res1", h, &mut rng);
        let enc_conv2 = Conv1d::new(&mut ps, "enc.conv2", h, d, 4, 2, 1, &mut rng);
        let enc_res2 = ResBlock::new(&mut ps, "enc.res2", d, &mut rng);
        let dec_res1 = ResBlock::new(&mut ps, "dec.res1", d, &mut rng);
        let dec_res2 = ResBlock::new(&mut ps, "dec.res2", d, &mut rng);
        let dec_conv1 = Conv1d::new(&mut ps, "dec.conv1", d, h, 3, 1, 1, &mut rng);
        let dec_conv2 = Conv1d::new(&mut ps, "dec.conv2", h, dp, 3, 1, 1, &mut rng);
        let dec_conv3 = Conv1d::new(&mut ps, "dec.conv3", dp, dp, 3, 1, 1, &mut rng);
        let codebook = ps.add(
            "codebook",
            crate::diff::params::init_normal(&[config.codebook_size, d], 1.0, &mut rng),
        );
        let k = config.codebook_size;
        MotionQuantizer {
            config,
            params: ps,
            enc_conv1,
            enc_res1,
            enc_conv2,
            enc_res2,
            dec_res1,
            dec_res2,
            dec_conv1,
            dec_conv2,
            dec_conv3,
            codebook,
            usage_counts: vec![0; k],
            steps_since_use: vec![0; k],
            codebook_initialized: false,
            trained: false,
        }
    }

    pub fn codebook_entries(&self) -> &NdArray {
        self.params.value(self.codebook)
    }

    pub fn bind(&self, g: &mut Graph, frozen: bool) -> BoundQuantizer {
        BoundQuantizer {
            enc_conv1: self.enc_conv1.bind(g, &self.params, frozen),
            enc_res1: self.enc_res1.bind(g, &self.params, frozen),
            enc_conv2: self.enc_conv2.bind(g, &self.params, frozen),
            enc_res2: self.enc_res2.bind(g, &self.params, frozen),
            dec_res1: self.dec_res1.bind(g, &self.params, frozen),
            dec_res2: self.dec_res2.bind(g, &self.params, frozen),
            dec_conv1: self.dec_conv1.bind(g, &self.params, frozen),
            dec_conv2: self.dec_conv2.bind(g, &self.params, frozen),
            dec_conv3: self.dec_conv3.bind(g, &self.params, frozen),
        }
    }

    /// Encoder input node from a normalized pose sequence: channel-major,
    /// contact channels stripped.
    pub fn encoder_input(&self, motion: &PoseSequence) -> NdArray {
        let t = motion.num_frames();
        let d_in = self.config.encoder_channels();
        let mut data = vec![0.0; d_in * t];
        for (r, row) in (0..t).map(|r| (r, motion.frames.row(r))) {
            for c in 0..d_in {
                data[c * t + r] = row[c];
            }
        }
        NdArray::matrix(d_in, t, data)
    }

    /// Compress a normalized pose sequence to `floor(T/4)` latent rows.
    pub fn encode(&self, motion: &PoseSequence) -> Result<LatentSequence> {
        let t = motion.num_frames();
        if t < FRAMES_PER_TOKEN {
            return Err(Error::Data(format!("encode needs at least 4 frames, got {t}")));
        }
        if motion.channels() != self.config.channels {
            return Err(Error::Data(format!(
                "encode: motion has {} channels, model expects {}",
                motion.channels(),
                self.config.channels
            )));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let input = g.input(self.encoder_input(motion));
        let latent = bound.encode(&mut g, input);
        let rows = g.value(latent).transposed();
        Ok(LatentSequence { rows })
    }

    /// Snap each latent row to its nearest codebook entry (ties take the
    /// lowest index). Returns the quantized rows and the index list.
    pub fn quantize(&self, latent: &LatentSequence) -> Result<(LatentSequence, Vec<usize>)> {
        let book = self.codebook_entries();
        let k = book.shape()[0];
        if k == 0 {
            return Err(Error::Data("empty codebook".into()));
        }
        if latent.dim() != book.shape()[1] {
            return Err(Error::Data(format!(
                "quantize: latent dim {} vs codebook dim {}",
                latent.dim(),
                book.shape()[1]
            )));
        }
        let t = latent.len();
        let d = latent.dim();
        let mut indices = Vec::with_capacity(t);
        let mut rows = vec![0.0; t * d];
        for i in 0..t {
            let row = latent.rows.row(i);
            let idx = nearest_code(row, book);
            indices.push(idx);
            rows[i * d..(i + 1) * d].copy_from_slice(book.row(idx));
        }
        Ok((LatentSequence { rows: NdArray::matrix(t, d, rows) }, indices))
    }

    /// Decode quantized latent rows back to a normalized pose sequence of
    /// `4t` frames (foot-contact channels included).
    pub fn decode(&self, quantized: &LatentSequence) -> Result<PoseSequence> {
        if quantized.is_empty() {
            return Err(Error::Data("decode needs at least one latent row".into()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let rows = g.input(quantized.rows.clone());
        let chan = g.transpose(rows);
        let out = bound.decode(&mut g, chan);
        let frames = g.value(out).transposed();
        Ok(PoseSequence::new(frames, 20.0))
    }

    /// Full discretization: BOM + per-row nearest codes + EOM. The input
    /// is trimmed to a multiple of 4 frames first.
    pub fn tokenize(&self, motion: &PoseSequence) -> Result<MotionTokenSequence> {
        if !self.trained {
            return Err(Error::Dependency(
                "quantizer is untrained; train or load a checkpoint before tokenizing".into(),
            ));
        }
        let trimmed = motion.trim_to_multiple_of_4();
        let latent = self.encode(&trimmed)?;
        let (_, indices) = self.quantize(&latent)?;
        MotionTokenSequence::from_interior(indices, self.config.codebook_size)
    }

    /// Map tokens back to codebook rows and decode; 4 frames per interior
    /// token.
    pub fn detokenize(&self, tokens: &MotionTokenSequence) -> Result<PoseSequence> {
        if tokens.codebook_size() != self.config.codebook_size {
            return Err(Error::Data(format!(
                "token sequence codebook size {} vs model {}",
                tokens.codebook_size(),
                self.config.codebook_size
            )));
        }
        let interior = tokens.interior();
        if interior.is_empty() {
            return Err(Error::Data("detokenize: empty interior".into()));
        }
        let book = self.codebook_entries();
        let d = self.config.code_dim;
        let mut rows = vec![0.0; interior.len() * d];
        for (i, &id) in interior.iter().enumerate() {
            rows[i * d..(i + 1) * d].copy_from_slice(book.row(id));
        }
        self.decode(&LatentSequence { rows: NdArray::matrix(interior.len(), d, rows) })
    }

    /// The 4-frame motion segment a single codebook entry decodes to.
    pub fn token_context(&self, token_id: usize) -> Result<PoseSequence> {
        if token_id >= self.config.codebook_size {
            return Err(Error::Data(format!(
                "token_context: id {token_id} is a special or out-of-range token (K={})",
                self.config.codebook_size
            )));
        }
        let book = self.codebook_entries();
        let rows = NdArray::matrix(1, self.config.code_dim, book.row(token_id).to_vec());
        self.decode(&LatentSequence { rows })
    }

    /// Loss terms on given tensors (report values only; training wires
    /// the gradient paths itself).
    pub fn vq_loss(
        &self,
        motion: &PoseSequence,
        reconstruction: &PoseSequence,
        latent: &LatentSequence,
        quantized: &LatentSequence,
        beta: Real,
    ) -> VqLossReport {
        let n = motion.frames.numel() as Real;
        let rec = motion
            .frames
            .data()
            .iter()
            .zip(reconstruction.frames.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<Real>()
            / n;
        let m = latent.rows.numel() as Real;
        let sq = latent
            .rows
            .data()
            .iter()
            .zip(quantized.rows.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<Real>()
            / m;
        VqLossReport { reconstruction: rec, codebook_term: sq, commitment_term: sq, beta }
    }

    pub fn save(&self, path: &std::path::Path, stats: &NormStats, meta: serde_json::Value) -> Result<()> {
        let mut hyper = serde_json::to_value(&self.config)?;
        hyper["trained"] = serde_json::Value::Bool(self.trained);
        hyper["meta"] = meta;
        let mut ck = Checkpoint::new("quantizer", hyper);
        ck.push_params("", &self.params);
        ck.push("norm.mean", NdArray::vector(stats.mean.clone()));
        ck.push("norm.std", NdArray::vector(stats.std.clone()));
        ck.push(
            "norm.mask",
            NdArray::vector(stats.scale_mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()),
        );
        ck.push(
            "codebook.usage",
            NdArray::vector(self.usage_counts.iter().map(|&c| c as Real).collect()),
        );
        ck.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, NormStats)> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind("quantizer")?;
        let config: QuantizerConfig = serde_json::from_value(ck.hyper.clone())?;
        let trained = ck.hyper["trained"].as_bool().unwrap_or(false);
        let mut model = MotionQuantizer::new(config, 0);
        ck.load_params("", &mut model.params)?;
        model.trained = trained;
        model.codebook_initialized = true;
        model.usage_counts = ck
            .tensor("codebook.usage")?
            .data()
            .iter()
            .map(|&c| c as u64)
            .collect();
        let mean = ck.tensor("norm.mean")?.data().to_vec();
        let std = ck.tensor("norm.std")?.data().to_vec();
        let mask = ck.tensor("norm.mask")?.data().iter().map(|&v| v != 0.0).collect();
        let stats = NormStats { mean, std, scale_mask: mask, degenerate: vec![] };
        Ok((model, stats))
    }
}

/// Exhaustive nearest-neighbor scan; strict `<` keeps the lowest index on
/// ties.
fn nearest_code(row: &[Real], book: &NdArray) -> usize {
    let k = book.shape()[0];
    let mut best = 0usize;
    let mut best_d = Real::INFINITY;
    for c in 0..k {
        let mut dist = 0.0;
        for (a, b) in row.iter().zip(book.row(c)) {
            let diff = a - b;
            dist += diff * diff;
        }
        if dist < best_d {
            best_d = dist;
            best = c;
        }
    }
    best
}

pub struct BoundQuantizer {
    enc_conv1: BoundConv1d,
    enc_res1: BoundResBlock,
    enc_conv2: BoundConv1d,
    enc_res2: BoundResBlock,
    dec_res1: BoundResBlock,
    dec_res2: BoundResBlock,
    dec_conv1: BoundConv1d,
    dec_conv2: BoundConv1d,
    dec_conv3: BoundConv1d,
}

impl BoundQuantizer {
    pub fn encode(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let h = self.enc_conv1.apply(g, x);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        let h = self.enc_res1.apply(g, h);
        let h = self.enc_conv2.apply(g, h);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        self.enc_res2.apply(g, h)
    }

    pub fn decode(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let h = self.dec_res1.apply(g, x);
        let h = self.dec_res2.apply(g, h);
        let h = g.upsample2(h);
        let h = self.dec_conv1.apply(g, h);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        let h = g.upsample2(h);
        let h = self.dec_conv2.apply(g, h);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        self.dec_conv3.apply(g, h)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizerTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: Real,
    /// Learning rate decays linearly to `lr * lr_final_frac`.
    pub lr_final_frac: Real,
    pub seed: u64,
    /// Crop training sequences to at most this many frames.
    pub max_frames: usize,
    pub grad_clip: Real,
    pub log_every: usize,
}

impl Default for QuantizerTrainConfig {
    fn default() -> Self {
        QuantizerTrainConfig {
            steps: 2000,
            batch_size: 8,
            lr: 2e-4,
            lr_final_frac: 0.1,
            seed: 0,
            max_frames: 32,
            grad_clip: 1.0,
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: Real,
    pub reconstruction: Real,
    pub codebook: Real,
    pub commitment: Real,
}

/// Train on normalized motions. Returns the loss curve; aborts with a
/// `Numerical` error on divergence, leaving the last finite parameters in
/// place.
pub fn train_quantizer(
    model: &mut MotionQuantizer,
    motions: &[PoseSequence],
    cfg: &QuantizerTrainConfig,
) -> Result<Vec<TrainRecord>> {
    assert!(!motions.is_empty(), "train_quantizer: empty corpus");
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x71));
    let mut opt = crate::diff::Adam::new(&model.params, cfg.lr);
    let beta = model.config.beta;
    let mut curve = Vec::new();

    for step in 0..cfg.steps {
        let frac = step as Real / cfg.steps.max(1) as Real;
        opt.set_lr(cfg.lr * (1.0 - (1.0 - cfg.lr_final_frac) * frac));
        model.params.zero_grads();
        let mut g = Graph::new();
        let bound = model.bind(&mut g, false);
        let codebook_node = g.param(&model.params, model.codebook);
        let mut losses = Vec::with_capacity(cfg.batch_size);
        let mut report = (0.0, 0.0, 0.0);
        let mut batch_latent_rows: Vec<Vec<Real>> = Vec::new();
        let mut batch_indices: Vec<usize> = Vec::new();

        for _ in 0..cfg.batch_size {
            let m = &motions[rng.random_range(0..motions.len())];
            let m = clamp_window(m, cfg.max_frames, &mut rng);

            let enc_in = g.input(model.encoder_input(&m));
            let latent_cm = bound.encode(&mut g, enc_in);
            let latent_rows = g.transpose(latent_cm); // [t, d]

            // data-dependent codebook init from the first batch
            if !model.codebook_initialized {
                let v = g.value(latent_rows);
                for i in 0..v.shape()[0] {
                    batch_latent_rows.push(v.row(i).to_vec());
                }
            }

            let latent_val = LatentSequence { rows: g.value(latent_rows).clone() };
            let (quantized, indices) = model.quantize(&latent_val)?;
            batch_indices.extend(indices.iter().copied());

            let quantized_const = g.input(quantized.rows.clone());
            let st = g.straight_through(latent_rows, quantized_const);
            let dec_in = g.transpose(st);
            let recon_cm = bound.decode(&mut g, dec_in);
            let recon = g.transpose(recon_cm); // [T, D_p]

            let target = g.input(m.frames.clone());
            let loss_rec = g.l1_loss(recon, target);

            // codebook pull: gradient reaches only the codebook rows
            let latent_detached = g.input(latent_val.rows.clone());
            let gathered = g.embedding(codebook_node, &indices);
            let loss_cb = g.mse_loss(latent_detached, gathered);

            // commitment: gradient reaches only the encoder
            let loss_commit = g.mse_loss(latent_rows, quantized_const);
            let loss_commit_w = g.scale(loss_commit, beta);

            let partial = g.add(loss_rec, loss_cb);
            let total = g.add(partial, loss_commit_w);
            losses.push(total);
            report.0 += g.value(loss_rec).scalar_value();
            report.1 += g.value(loss_cb).scalar_value();
            report.2 += g.value(loss_commit).scalar_value();
        }

        if !model.codebook_initialized {
            init_codebook_from_rows(model, &batch_latent_rows, &mut rng);
            // first batch only seeded the codebook; skip the update
            continue;
        }

        let batch_loss = g.add_all(&losses);
        let loss = g.scale(batch_loss, 1.0 / cfg.batch_size as Real);
        let loss_val = g.value(loss).scalar_value();
        if !loss_val.is_finite() {
            return Err(Error::Numerical(format!(
                "quantizer training diverged at step {step} (loss {loss_val})"
            )));
        }
        g.backward(loss);
        g.accumulate_param_grads(&mut model.params);
        crate::diff::clip_global_norm(&mut model.params, cfg.grad_clip);
        opt.step(&mut model.params)?;

        track_usage(model, &batch_indices, &mut rng);

        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            let b = cfg.batch_size as Real;
            curve.push(TrainRecord {
                step,
                loss: loss_val,
                reconstruction: report.0 / b,
                codebook: report.1 / b,
                commitment: report.2 / b,
            });
        }
    }
    model.trained = true;
    Ok(curve)
}

/// Random window of at most `max_frames`, multiple of 4.
fn clamp_window(m: &PoseSequence, max_frames: usize, rng: &mut Rng) -> PoseSequence {
    let trimmed = m.trim_to_multiple_of_4();
    let t = trimmed.num_frames();
    let cap = max_frames - (max_frames % 4);
    if t <= cap {
        return trimmed;
    }
    let start4 = rng.random_range(0..=(t - cap) / 4);
    trimmed.slice_frames(start4 * 4, cap)
}

fn init_codebook_from_rows(model: &mut MotionQuantizer, rows: &[Vec<Real>], rng: &mut Rng) {
    let k = model.config.codebook_size;
    let d = model.config.code_dim;
    assert!(!rows.is_empty());
    let book = model.params.get_mut(model.codebook);
    for i in 0..k {
        let src = &rows[rng.random_range(0..rows.len())];
        let noise_scale = 1e-3;
        for j in 0..d {
            let n: Real = rng.random::<Real>() * 2.0 - 1.0;
            book.value.data_mut()[i * d + j] = src[j] + noise_scale * n;
        }
    }
    model.codebook_initialized = true;
}

fn track_usage(model: &mut MotionQuantizer, batch_indices: &[usize], rng: &mut Rng) {
    let k = model.config.codebook_size;
    let mut hit = vec![false; k];
    for &i in batch_indices {
        hit[i] = true;
        model.usage_counts[i] += 1;
    }
    for i in 0..k {
        if hit[i] {
            model.steps_since_use[i] = 0;
        } else {
            model.steps_since_use[i] += 1;
        }
    }
    let limit = model.config.dead_code_steps as u64;
    if limit == 0 || batch_indices.is_empty() {
        return;
    }
    for i in 0..k {
        if model.steps_since_use[i] >= limit {
            // re-seed from a random latent row the current batch selected
            let src_idx = batch_indices[rng.random_range(0..batch_indices.len())];
            let d = model.config.code_dim;
            let src: Vec<Real> = model.codebook_entries().row(src_idx).to_vec();
            let book = model.params.get_mut(model.codebook);
            for j in 0..d {
                let n: Real = rng.random::<Real>() * 2.0 - 1.0;
                book.value.data_mut()[i * d + j] = src[j] + 1e-2 * n;
            }
            model.steps_since_use[i] = 0;
        }
    }
}

/// Mean absolute reconstruction error over held-out normalized motions.
pub fn eval_reconstruction(model: &MotionQuantizer, motions: &[PoseSequence]) -> Result<Real> {
    let mut total = 0.0;
    let mut count = 0.0;
    for m in motions {
        let m = m.trim_to_multiple_of_4();
        if m.num_frames() < FRAMES_PER_TOKEN {
            continue;
        }
        let latent = model.encode(&m)?;
        let (quantized, _) = model.quantize(&latent)?;
        let recon = model.decode(&quantized)?;
        total += m
            .frames
            .data()
            .iter()
            .zip(recon.frames.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<Real>();
        count += m.frames.numel() as Real;
    }
    if count == 0.0 {
        return Err(Error::Data("eval_reconstruction: no usable motions".into()));
    }
    Ok(total / count)
}
