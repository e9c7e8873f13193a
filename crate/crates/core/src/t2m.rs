//! Text-to-motion generation: a bi-directional GRU encodes the
//! description, an attention-GRU decoder predicts motion tokens
//! autoregressively, and sampling runs until the end token has maximum
//! probability. Training adds an inverse-alignment term that feeds
//! Gumbel-relaxed sampled tokens through the frozen motion-to-text model
//! and scores the original description.
//!
//! A Transformer variant (teacher-forced NLL only, no inverse alignment)
//! shares the generation contract.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diff::{Adam, Checkpoint, Graph, NdArray, NodeId, Real, Reduction};
use crate::error::{Error, Result};
use crate::m2t::MotionToText;
use crate::nn::{
    BiGru, BoundBiGru, BoundEmbedding, BoundGruCell, BoundLayerNorm, BoundLinear, Embedding,
    GruCell, LayerNorm, Linear, LEAKY_SLOPE,
};
use crate::tokens::MotionTokenSequence;
use crate::transformer::{sample_masked, Seq2SeqTransformer, SrcInput, TransformerConfig};
use crate::util::{derive_seed, rng_from_seed, Rng};
use crate::vocab::TextTokenSequence;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct T2mConfig {
    pub vocab_size: usize,
    pub codebook_size: usize,
    pub word_emb: usize,
    /// Per-direction encoder GRU width; word vectors have twice this.
    pub enc_hidden: usize,
    /// Decoder GRU width d_h.
    pub dec_hidden: usize,
    pub d_att: usize,
    pub token_emb: usize,
    /// Hard cap on generated interior tokens.
    pub max_tokens: usize,
}

impl T2mConfig {
    pub fn desk(vocab_size: usize, codebook_size: usize) -> Self {
        T2mConfig {
            vocab_size,
            codebook_size,
            word_emb: 64,
            enc_hidden: 64,
            dec_hidden: 256,
            d_att: 128,
            token_emb: 64,
            max_tokens: 50,
        }
    }

    pub fn paper_scale(vocab_size: usize, codebook_size: usize) -> Self {
        T2mConfig {
            vocab_size,
            codebook_size,
            word_emb: 300,
            enc_hidden: 512,
            dec_hidden: 1024,
            d_att: 1024,
            token_emb: 1024,
            max_tokens: 50,
        }
    }

    pub fn d_l(&self) -> usize {
        2 * self.enc_hidden
    }

    pub fn token_space(&self) -> usize {
        MotionTokenSequence::id_space(self.codebook_size)
    }

    pub fn bom(&self) -> usize {
        MotionTokenSequence::bom(self.codebook_size)
    }

    pub fn eom(&self) -> usize {
        MotionTokenSequence::eom(self.codebook_size)
    }
}

/// Final bi-GRU states plus per-word feature rows.
#[derive(Debug, Clone)]
pub struct SentenceEncoding {
    pub sentence_vector: NdArray, // [d_l]
    pub word_vectors: NdArray,    // [N, d_l]
}

/// Decoder recurrence carried between steps.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub hidden: NdArray, // [d_h]
}

pub struct TextToMotion {
    pub config: T2mConfig,
    pub params: crate::diff::ParamSet,
    word_emb: Embedding,
    encoder: BiGru,
    z2init: Linear,
    token_emb: Embedding,
    w_q: Linear,
    w_k: Linear,
    w_v: Linear,
    att_linear: Linear,
    att_ln: LayerNorm,
    gru: GruCell,
    out: Linear,
    pub trained: bool,
}

impl TextToMotion {
    pub fn new(config: T2mConfig, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut ps = crate::diff::ParamSet::new();
        let d_l = config.d_l();
        let d_h = config.dec_hidden;
        let word_emb = Embedding::new(&mut ps, "word_emb", config.vocab_size, config.word_emb, &mut rng);
        let encoder = BiGru::new(&mut ps, "enc", config.word_emb, config.enc_hidden, &mut rng);
        let z2init = Linear::new(&mut ps, "z2init", d_l, d_h, true, &mut rng);
        let token_emb = Embedding::new(&mut ps, "token_emb", config.token_space(), config.token_emb, &mut rng);
        let w_q = Linear::new(&mut ps, "att.wq", d_h, config.d_att, true, &mut rng);
        let w_k = Linear::new(&mut ps, "att.wk", d_l, config.d_att, false, &mut rng);
        let w_v = Linear::new(&mut ps, "att.wv", d_l, config.d_att, true, &mut rng);
        let att_linear = Linear::new(
            &mut ps,
            "att_linear",
            config.token_emb + config.d_att,
            d_h,
            true,
            &mut rng,
        );
        let att_ln = LayerNorm::new(&mut ps, "att_ln", d_h);
        let gru = GruCell::new(&mut ps, "dec_gru", d_h, d_h, &mut rng);
        let out = Linear::new(&mut ps, "out", d_h, config.token_space(), false, &mut rng);
        TextToMotion {
            config,
            params: ps,
            word_emb,
            encoder,
            z2init,
            token_emb,
            w_q,
            w_k,
            w_v,
            att_linear,
            att_ln,
            gru,
            out,
            trained: false,
        }
    }

    pub fn bind(&self, g: &mut Graph, frozen: bool) -> BoundT2m {
        BoundT2m {
            word_emb: self.word_emb.bind(g, &self.params, frozen),
            encoder: self.encoder.bind(g, &self.params, frozen),
            z2init: self.z2init.bind(g, &self.params, frozen),
            token_emb: self.token_emb.bind(g, &self.params, frozen),
            w_q: self.w_q.bind(g, &self.params, frozen),
            w_k: self.w_k.bind(g, &self.params, frozen),
            w_v: self.w_v.bind(g, &self.params, frozen),
            att_linear: self.att_linear.bind(g, &self.params, frozen),
            att_ln: self.att_ln.bind(g, &self.params, frozen),
            gru: self.gru.bind(g, &self.params, frozen),
            out: self.out.bind(g, &self.params, frozen),
            d_att: self.config.d_att,
            word_dim: self.config.word_emb,
        }
    }

    /// Deterministic sentence and word features over the interior words.
    pub fn encode_text(&self, text: &TextTokenSequence) -> Result<SentenceEncoding> {
        if text.interior().is_empty() {
            return Err(Error::Data("encode_text: empty interior".into()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let (words, sentence) = bound.encode_text(&mut g, text.interior());
        Ok(SentenceEncoding {
            sentence_vector: g.value(sentence).clone(),
            word_vectors: g.value(words).clone(),
        })
    }

    /// Scaled dot-product attention read for the current decoder state
    /// (value-level; the training path builds the same ops in-graph).
    pub fn attend(&self, state: &DecoderState, words: &NdArray) -> NdArray {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let w = g.input(words.clone());
        let keys = bound.w_k.apply(&mut g, w);
        let values = bound.w_v.apply(&mut g, w);
        let h = g.input(self.hidden_matrix(state));
        let att = bound.attend(&mut g, h, keys, values);
        let v = g.value(att).clone();
        NdArray::vector(v.data().to_vec())
    }

    fn hidden_matrix(&self, state: &DecoderState) -> NdArray {
        NdArray::matrix(1, self.config.dec_hidden, state.hidden.data().to_vec())
    }

    /// Decoder start state from the sentence vector.
    pub fn init_state(&self, encoding: &SentenceEncoding) -> DecoderState {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let s = g.input(encoding.sentence_vector.clone());
        let h0 = bound.z2init.apply(&mut g, s);
        DecoderState { hidden: g.value(h0).clone() }
    }

    /// One autoregressive step: next-token distribution over the K+3 id
    /// space and the advanced state.
    pub fn step(
        &self,
        state: &DecoderState,
        prev_token: usize,
        encoding: &SentenceEncoding,
    ) -> Result<(Vec<Real>, DecoderState)> {
        if prev_token >= self.config.token_space() {
            return Err(Error::Data(format!(
                "step: token id {prev_token} out of space {}",
                self.config.token_space()
            )));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let w = g.input(encoding.word_vectors.clone());
        let keys = bound.w_k.apply(&mut g, w);
        let values = bound.w_v.apply(&mut g, w);
        let h = g.input(state.hidden.clone());
        let emb = bound.token_emb.lookup(&mut g, &[prev_token]);
        let emb_row = g.row(emb, 0);
        let (logits, new_h) = bound.step(&mut g, emb_row, h, keys, values);
        let probs = g.softmax(logits);
        Ok((
            g.value(probs).data().to_vec(),
            DecoderState { hidden: g.value(new_h).clone() },
        ))
    }

    /// Autoregressive sampling: at each step the full-distribution argmax
    /// is checked first — an end-token argmax terminates generation — and
    /// otherwise the next token is sampled from the distribution
    /// restricted to codebook ids (specials can never appear interior).
    /// At the cap the end token is appended.
    pub fn generate(
        &self,
        text: &TextTokenSequence,
        max_tokens: usize,
        rng: &mut Rng,
    ) -> Result<MotionTokenSequence> {
        let encoding = self.encode_text(text)?;
        let mut state = self.init_state(&encoding);
        let mut prev = self.config.bom();
        let k = self.config.codebook_size;
        let eom = self.config.eom();
        let mut interior = Vec::new();
        loop {
            let (probs, next_state) = self.step(&state, prev, &encoding)?;
            state = next_state;
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            if argmax == eom || interior.len() == max_tokens {
                break;
            }
            let log_probs: Vec<Real> = probs.iter().map(|p| p.max(1e-300).ln()).collect();
            let tok = sample_masked(&log_probs, &|i| i < k, rng);
            interior.push(tok);
            prev = tok;
        }
        MotionTokenSequence::from_interior(interior, k)
    }
}

pub struct BoundT2m {
    word_emb: BoundEmbedding,
    encoder: BoundBiGru,
    z2init: BoundLinear,
    pub token_emb: BoundEmbedding,
    w_q: BoundLinear,
    pub w_k: BoundLinear,
    pub w_v: BoundLinear,
    att_linear: BoundLinear,
    att_ln: BoundLayerNorm,
    gru: BoundGruCell,
    out: BoundLinear,
    d_att: usize,
    word_dim: usize,
}

impl BoundT2m {
    pub fn encode_text(&self, g: &mut Graph, word_ids: &[usize]) -> (NodeId, NodeId) {
        assert!(!word_ids.is_empty(), "encode_text: empty interior");
        let emb = self.word_emb.lookup(g, word_ids);
        let inputs: Vec<NodeId> = (0..word_ids.len()).map(|i| g.row(emb, i)).collect();
        let _ = self.word_dim;
        self.encoder.run(g, &inputs)
    }

    pub fn init_state(&self, g: &mut Graph, sentence: NodeId) -> NodeId {
        self.z2init.apply(g, sentence)
    }

    /// Attention read: queries from the hidden state, keys/values
    /// precomputed from the word vectors.
    pub fn attend(&self, g: &mut Graph, h_row: NodeId, keys: NodeId, values: NodeId) -> NodeId {
        // h_row: [1, d_h] or [d_h] -> Q [1, d_att]
        let h2 = if g.value(h_row).ndim() == 1 {
            g.stack_rows(&[h_row])
        } else {
            h_row
        };
        let q = self.w_q.apply(g, h2);
        let scores = g.matmul_tb(q, keys);
        let scaled = g.scale(scores, 1.0 / (self.d_att as Real).sqrt());
        let weights = g.softmax(scaled);
        let ctx = g.matmul(weights, values);
        g.row(ctx, 0)
    }

    /// One decoder step from a token embedding row.
    pub fn step(
        &self,
        g: &mut Graph,
        token_emb: NodeId,
        h: NodeId,
        keys: NodeId,
        values: NodeId,
    ) -> (NodeId, NodeId) {
        let att = self.attend(g, h, keys, values);
        let x = g.concat1(&[token_emb, att]);
        let x = self.att_linear.apply(g, x);
        let x = self.att_ln.apply(g, x);
        let x = g.leaky_relu(x, LEAKY_SLOPE);
        let new_h = self.gru.step(g, x, h);
        let logits = self.out.apply(g, new_h);
        (logits, new_h)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct T2mTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub seed: u64,
    pub teacher_forcing: Real,
    /// Weight of the inverse-alignment term; 0 trains the plain baseline.
    pub inverse_weight: Real,
    pub tau_start: Real,
    pub tau_end: Real,
    /// Cap on free-running rollout length during training.
    pub rollout_cap: usize,
    pub grad_clip: Real,
    pub log_every: usize,
}

impl Default for T2mTrainConfig {
    fn default() -> Self {
        T2mTrainConfig {
            steps: 1200,
            batch_size: 4,
            lr: 4e-4,
            seed: 0,
            teacher_forcing: 0.4,
            inverse_weight: 1.0,
            tau_start: 1.0,
            tau_end: 0.1,
            rollout_cap: 20,
            grad_clip: 1.0,
            log_every: 100,
        }
    }
}

impl T2mTrainConfig {
    /// Linear anneal over the first half of training, then flat.
    pub fn tau_at(&self, step: usize) -> Real {
        let half = (self.steps / 2).max(1);
        if step >= half {
            self.tau_end
        } else {
            let u = step as Real / half as Real;
            self.tau_start + (self.tau_end - self.tau_start) * u
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct T2mTrainRecord {
    pub step: usize,
    pub loss: Real,
    pub nll: Real,
    pub inverse: Real,
    pub tau: Real,
}

/// Teacher-forced NLL of the ground-truth tokens for one sample; returns
/// the per-token-mean loss node.
#[allow(clippy::too_many_arguments)]
fn teacher_forced_nll(
    g: &mut Graph,
    bound: &BoundT2m,
    cfg: &T2mConfig,
    train_cfg: &T2mTrainConfig,
    text: &TextTokenSequence,
    target: &MotionTokenSequence,
    rng: &mut Rng,
) -> NodeId {
    let (words, sentence) = bound.encode_text(g, text.interior());
    let keys = bound.w_k.apply(g, words);
    let values = bound.w_v.apply(g, words);
    let mut h = bound.init_state(g, sentence);
    let mut prev = cfg.bom();
    // targets: interior tokens then EOM
    let mut targets: Vec<i64> = target.interior().iter().map(|&t| t as i64).collect();
    targets.push(cfg.eom() as i64);
    let mut logit_rows = Vec::with_capacity(targets.len());
    for (i, &t) in targets.iter().enumerate() {
        let emb = bound.token_emb.lookup(g, &[prev]);
        let emb_row = g.row(emb, 0);
        let (logits, new_h) = bound.step(g, emb_row, h, keys, values);
        logit_rows.push(logits);
        h = new_h;
        if i + 1 < targets.len() {
            let teacher: Real = rng.random();
            prev = if teacher < train_cfg.teacher_forcing {
                t as usize
            } else {
                // scheduled sampling: feed the model's own sampled token
                let v = g.value(logits);
                let lp: Vec<Real> = v.data().to_vec();
                sample_masked(&lp, &|i| i < cfg.codebook_size, rng)
            };
        }
    }
    let stacked = g.stack_rows(&logit_rows);
    g.cross_entropy(stacked, &targets, Reduction::Mean)
}

/// Free-running Gumbel-relaxed rollout scored by the frozen
/// motion-to-text model: returns the negative log-likelihood of the
/// description given the relaxed sample (mean per text token). Gradients
/// reach the generator through the relaxation; the fed-back discrete
/// token is the detached argmax of each relaxed sample.
#[allow(clippy::too_many_arguments)]
pub fn inverse_alignment_loss_graph(
    g: &mut Graph,
    bound: &BoundT2m,
    cfg: &T2mConfig,
    m2t: &MotionToText,
    m2t_bound: &crate::transformer::BoundTransformer,
    text: &TextTokenSequence,
    tau: Real,
    rollout_cap: usize,
    rng: &mut Rng,
) -> Result<NodeId> {
    if tau <= 0.0 {
        return Err(Error::Data(format!("inverse alignment needs tau > 0, got {tau}")));
    }
    let space = cfg.token_space();
    let onehot = |g: &mut Graph, id: usize| {
        let mut v = vec![0.0; space];
        v[id] = 1.0;
        g.input(NdArray::vector(v))
    };
    let (words, sentence) = bound.encode_text(g, text.interior());
    let keys = bound.w_k.apply(g, words);
    let values = bound.w_v.apply(g, words);
    let mut h = bound.init_state(g, sentence);
    let mut prev = cfg.bom();
    let mut rows: Vec<NodeId> = vec![onehot(g, cfg.bom())];
    let mut ended_by_eom = false;
    for _ in 0..rollout_cap {
        let emb = bound.token_emb.lookup(g, &[prev]);
        let emb_row = g.row(emb, 0);
        let (logits, new_h) = bound.step(g, emb_row, h, keys, values);
        h = new_h;
        let relaxed = g.gumbel_softmax(logits, tau, rng);
        rows.push(relaxed);
        let hard = g
            .value(relaxed)
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if hard == cfg.eom() {
            ended_by_eom = true;
            break;
        }
        // specials other than EOM cannot be fed back; snap to the best
        // codebook id
        prev = if hard < cfg.codebook_size {
            hard
        } else {
            let v = g.value(relaxed);
            (0..cfg.codebook_size)
                .max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap())
                .unwrap()
        };
    }
    if !ended_by_eom {
        rows.push(onehot(g, cfg.eom()));
    }
    let soft_src = g.stack_rows(&rows);
    let score = m2t.score_with_bound(g, m2t_bound, SrcInput::Soft(soft_src), text);
    let neg = g.scale(score, -1.0);
    let n_text = text.ids().len() - 1; // scored target positions
    Ok(g.scale(neg, 1.0 / n_text as Real))
}

/// Value-level wrapper used by tests and the finite-difference oracle:
/// fixed `noise_seed` gives common random numbers across calls.
pub fn inverse_alignment_loss(
    t2m: &TextToMotion,
    m2t: &MotionToText,
    text: &TextTokenSequence,
    tau: Real,
    rollout_cap: usize,
    noise_seed: u64,
) -> Result<Real> {
    let mut g = Graph::new();
    let bound = t2m.bind(&mut g, true);
    let m2t_bound = m2t.model.bind(&mut g, true);
    let mut rng = rng_from_seed(noise_seed);
    let loss = inverse_alignment_loss_graph(
        &mut g, &bound, &t2m.config, m2t, &m2t_bound, text, tau, rollout_cap, &mut rng,
    )?;
    Ok(g.value(loss).scalar_value())
}

/// One optimization step over a batch; returns (total, nll, inverse)
/// means. Exposed for the training loop and the paired ablation runs.
#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut TextToMotion,
    m2t: Option<&MotionToText>,
    pairs: &[(TextTokenSequence, MotionTokenSequence)],
    cfg: &T2mTrainConfig,
    tau: Real,
    opt: &mut Adam,
    rng: &mut Rng,
) -> Result<(Real, Real, Real)> {
    model.params.zero_grads();
    let mut g = Graph::new();
    let bound = model.bind(&mut g, false);
    let m2t_bound = m2t.map(|m| m.model.bind(&mut g, true));
    let mut item_losses = Vec::with_capacity(cfg.batch_size);
    let mut nll_sum = 0.0;
    let mut inv_sum = 0.0;
    for _ in 0..cfg.batch_size {
        let (text, target) = &pairs[rng.random_range(0..pairs.len())];
        let nll = teacher_forced_nll(&mut g, &bound, &model.config, cfg, text, target, rng);
        nll_sum += g.value(nll).scalar_value();
        let item = if cfg.inverse_weight > 0.0 {
            let m2t = m2t.ok_or_else(|| {
                Error::Dependency("inverse alignment needs a frozen motion2text model".into())
            })?;
            let inv = inverse_alignment_loss_graph(
                &mut g,
                &bound,
                &model.config,
                m2t,
                m2t_bound.as_ref().unwrap(),
                text,
                tau,
                cfg.rollout_cap,
                rng,
            )?;
            inv_sum += g.value(inv).scalar_value();
            let w = g.scale(inv, cfg.inverse_weight);
            g.add(nll, w)
        } else {
            nll
        };
        item_losses.push(item);
    }
    let total = g.add_all(&item_losses);
    let loss = g.scale(total, 1.0 / cfg.batch_size as Real);
    let loss_val = g.value(loss).scalar_value();
    if !loss_val.is_finite() {
        return Err(Error::Numerical("text2motion training diverged".into()));
    }
    g.backward(loss);
    g.accumulate_param_grads(&mut model.params);
    crate::diff::clip_global_norm(&mut model.params, cfg.grad_clip);
    opt.step(&mut model.params)?;
    let b = cfg.batch_size as Real;
    Ok((loss_val, nll_sum / b, inv_sum / b))
}

/// Train on (text, motion tokens) pairs; `m2t` must be the frozen
/// translation model when `inverse_weight > 0`.
pub fn train_t2m(
    model: &mut TextToMotion,
    m2t: Option<&MotionToText>,
    pairs: &[(TextTokenSequence, MotionTokenSequence)],
    cfg: &T2mTrainConfig,
) -> Result<Vec<T2mTrainRecord>> {
    assert!(!pairs.is_empty(), "train_t2m: empty pair set");
    if cfg.inverse_weight > 0.0 && m2t.is_none() {
        return Err(Error::Dependency(
            "inverse alignment enabled but no motion2text model was provided".into(),
        ));
    }
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x7432));
    let mut opt = Adam::new(&model.params, cfg.lr);
    let mut curve = Vec::new();
    for step in 0..cfg.steps {
        let tau = cfg.tau_at(step);
        let (loss, nll, inverse) = train_step(model, m2t, pairs, cfg, tau, &mut opt, &mut rng)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            curve.push(T2mTrainRecord { step, loss, nll, inverse, tau });
        }
    }
    model.trained = true;
    Ok(curve)
}

impl TextToMotion {
    pub fn save(&self, path: &std::path::Path, meta: serde_json::Value) -> Result<()> {
        let hyper = serde_json::json!({
            "config": &self.config,
            "trained": self.trained,
            "meta": meta,
        });
        let mut ck = Checkpoint::new("t2m", hyper);
        ck.push_params("", &self.params);
        ck.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind("t2m")?;
        let config: T2mConfig = serde_json::from_value(ck.hyper["config"].clone())?;
        let mut m = TextToMotion::new(config, 0);
        ck.load_params("", &mut m.params)?;
        m.trained = ck.hyper["trained"].as_bool().unwrap_or(false);
        Ok(m)
    }
}

// ── Transformer variant (no inverse alignment) ──────────────────────

pub struct T2mTransformer {
    pub config: TransformerConfig,
    pub codebook_size: usize,
    pub max_tokens: usize,
    pub model: Seq2SeqTransformer,
    pub trained: bool,
}

impl T2mTransformer {
    pub fn desk(vocab_size: usize, codebook_size: usize, seed: u64) -> Self {
        let config = TransformerConfig::desk(vocab_size, MotionTokenSequence::id_space(codebook_size));
        let model = Seq2SeqTransformer::new(config.clone(), seed);
        T2mTransformer { config, codebook_size, max_tokens: 50, model, trained: false }
    }

    /// Same generation contract as the GRU model: sample until the end
    /// token is the argmax, cap guarantees termination.
    pub fn generate(&self, text: &TextTokenSequence, rng: &mut Rng) -> Result<MotionTokenSequence> {
        let k = self.codebook_size;
        let interior = crate::transformer::sample_decode(
            &self.model,
            text.ids(),
            Some(crate::vocab::PAD),
            MotionTokenSequence::bom(k),
            MotionTokenSequence::eom(k),
            &|i| i < k,
            self.max_tokens,
            rng,
        );
        MotionTokenSequence::from_interior(interior, k)
    }

    pub fn loss(&self, text: &TextTokenSequence, target: &MotionTokenSequence) -> Real {
        let ids = target.ids();
        let tgt_input = &ids[..ids.len() - 1];
        let targets: Vec<i64> = ids[1..].iter().map(|&t| t as i64).collect();
        crate::transformer::seq2seq_nll(
            &self.model,
            text.ids(),
            Some(crate::vocab::PAD),
            tgt_input,
            &targets,
            Reduction::Mean,
        )
    }

    pub fn save(&self, path: &std::path::Path, meta: serde_json::Value) -> Result<()> {
        let hyper = serde_json::json!({
            "config": &self.config,
            "codebook_size": self.codebook_size,
            "max_tokens": self.max_tokens,
            "trained": self.trained,
            "meta": meta,
        });
        let mut ck = Checkpoint::new("t2m-transformer", hyper);
        ck.push_params("", &self.model.params);
        ck.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind("t2m-transformer")?;
        let config: TransformerConfig = serde_json::from_value(ck.hyper["config"].clone())?;
        let codebook_size = ck.hyper["codebook_size"].as_u64().unwrap() as usize;
        let max_tokens = ck.hyper["max_tokens"].as_u64().unwrap() as usize;
        let model = Seq2SeqTransformer::new(config.clone(), 0);
        let mut t = T2mTransformer { config, codebook_size, max_tokens, model, trained: false };
        ck.load_params("", &mut t.model.params)?;
        t.trained = ck.hyper["trained"].as_bool().unwrap_or(false);
        Ok(t)
    }
}

/// Full-teacher-forcing training for the Transformer variant.
pub fn train_t2m_transformer(
    model: &mut T2mTransformer,
    pairs: &[(TextTokenSequence, MotionTokenSequence)],
    cfg: &crate::m2t::M2tTrainConfig,
) -> Result<Vec<crate::m2t::M2tTrainRecord>> {
    assert!(!pairs.is_empty(), "train_t2m_transformer: empty pair set");
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x7454));
    let mut opt = Adam::new(&model.model.params, cfg.lr);
    let mut curve = Vec::new();
    for step in 0..cfg.steps {
        model.model.params.zero_grads();
        let mut g = Graph::new();
        let bound = model.model.bind(&mut g, false);
        let mut losses = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let (text, target) = &pairs[rng.random_range(0..pairs.len())];
            let mut tm = crate::transformer::TrainMode { rng: &mut rng };
            let memory = bound.encode(&mut g, SrcInput::Hard(text.ids()), None, Some(&mut tm));
            let ids = target.ids();
            let tgt_input = &ids[..ids.len() - 1];
            let targets: Vec<i64> = ids[1..].iter().map(|&t| t as i64).collect();
            let logits = bound.decode_logits(&mut g, memory, tgt_input, None, Some(&mut tm));
            losses.push(g.cross_entropy(logits, &targets, Reduction::Mean));
        }
        let total = g.add_all(&losses);
        let loss = g.scale(total, 1.0 / losses.len() as Real);
        let loss_val = g.value(loss).scalar_value();
        if !loss_val.is_finite() {
            return Err(Error::Numerical("t2m transformer training diverged".into()));
        }
        g.backward(loss);
        g.accumulate_param_grads(&mut model.model.params);
        crate::diff::clip_global_norm(&mut model.model.params, cfg.grad_clip);
        opt.step(&mut model.model.params)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            curve.push(crate::m2t::M2tTrainRecord { step, loss: loss_val });
        }
    }
    model.trained = true;
    Ok(curve)
}
