//! Encoder-decoder Transformer over two token alphabets, with greedy,
//! beam and stochastic decoding. Shared by the motion-to-text translator
//! and the text-to-motion variant.

use rand::Rng as _;

use crate::diff::{Graph, NodeId, ParamSet, Real, Reduction};
use crate::error::{Error, Result};
use crate::nn::{
    attention_mask, dropout, sinusoidal_positions, BoundEmbedding, BoundLayerNorm, BoundLinear,
    BoundMha, Embedding, LayerNorm, Linear, MultiHeadAttention, LEAKY_SLOPE,
};
use crate::util::Rng;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct TransformerConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub d_model: usize,
    pub heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub d_ff: usize,
    pub dropout: Real,
    pub max_len: usize,
}

impl TransformerConfig {
    pub fn desk(src_vocab: usize, tgt_vocab: usize) -> Self {
        TransformerConfig {
            src_vocab,
            tgt_vocab,
            d_model: 128,
            heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            d_ff: 512,
            dropout: 0.1,
            max_len: 256,
        }
    }

    pub fn paper_scale(src_vocab: usize, tgt_vocab: usize, layers: usize) -> Self {
        TransformerConfig {
            src_vocab,
            tgt_vocab,
            d_model: 512,
            heads: 8,
            enc_layers: layers,
            dec_layers: layers,
            d_ff: 2048,
            dropout: 0.1,
            max_len: 256,
        }
    }
}

struct EncoderLayer {
    attn: MultiHeadAttention,
    ln1: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    ln2: LayerNorm,
}

struct DecoderLayer {
    self_attn: MultiHeadAttention,
    ln1: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln2: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    ln3: LayerNorm,
}

pub struct Seq2SeqTransformer {
    pub config: TransformerConfig,
    pub params: ParamSet,
    src_emb: Embedding,
    tgt_emb: Embedding,
    enc: Vec<EncoderLayer>,
    dec: Vec<DecoderLayer>,
    out_proj: Linear,
}

/// Source tokens: hard ids, or simplex rows mixing source embeddings
/// (for the Gumbel-relaxed inverse-alignment path).
pub enum SrcInput<'a> {
    Hard(&'a [usize]),
    Soft(NodeId),
}

impl Seq2SeqTransformer {
    pub fn new(config: TransformerConfig, seed: u64) -> Self {
        let mut rng = crate::util::rng_from_seed(seed);
        let mut ps = ParamSet::new();
        let d = config.d_model;
        let src_emb = Embedding::new(&mut ps, "src_emb", config.src_vocab, d, &mut rng);
        let tgt_emb = Embedding::new(&mut ps, "tgt_emb", config.tgt_vocab, d, &mut rng);
        let enc = (0..config.enc_layers)
            .map(|i| EncoderLayer {
                attn: MultiHeadAttention::new(&mut ps, &format!("enc{i}.attn"), d, config.heads, &mut rng),
                ln1: LayerNorm::new(&mut ps, &format!("enc{i}.ln1"), d),
                ff1: Linear::new(&mut ps, &format!("enc{i}.ff1"), d, config.d_ff, true, &mut rng),
                ff2: Linear::new(&mut ps, &format!("enc{i}.ff2"), config.d_ff, d, true, &mut rng),
                ln2: LayerNorm::new(&mut ps, &format!("enc{i}.ln2"), d),
            })
            .collect();
        let dec = (0..config.dec_layers)
            .map(|i| DecoderLayer {
                self_attn: MultiHeadAttention::new(&mut ps, &format!("dec{i}.self"), d, config.heads, &mut rng),
                ln1: LayerNorm::new(&mut ps, &format!("dec{i}.ln1"), d),
                cross_attn: MultiHeadAttention::new(&mut ps, &format!("dec{i}.cross"), d, config.heads, &mut rng),
                ln2: LayerNorm::new(&mut ps, &format!("dec{i}.ln2"), d),
                ff1: Linear::new(&mut ps, &format!("dec{i}.ff1"), d, config.d_ff, true, &mut rng),
                ff2: Linear::new(&mut ps, &format!("dec{i}.ff2"), config.d_ff, d, true, &mut rng),
                ln3: LayerNorm::new(&mut ps, &format!("dec{i}.ln3"), d),
            })
            .collect();
        let out_proj = Linear::new(&mut ps, "out_proj", d, config.tgt_vocab, false, &mut rng);
        Seq2SeqTransformer { config, params: ps, src_emb, tgt_emb, enc, dec, out_proj }
    }

    pub fn bind(&self, g: &mut Graph, frozen: bool) -> BoundTransformer {
        BoundTransformer {
            src_emb: self.src_emb.bind(g, &self.params, frozen),
            tgt_emb: self.tgt_emb.bind(g, &self.params, frozen),
            enc: self
                .enc
                .iter()
                .map(|l| BoundEncoderLayer {
                    attn: l.attn.bind(g, &self.params, frozen),
                    ln1: l.ln1.bind(g, &self.params, frozen),
                    ff1: l.ff1.bind(g, &self.params, frozen),
                    ff2: l.ff2.bind(g, &self.params, frozen),
                    ln2: l.ln2.bind(g, &self.params, frozen),
                })
                .collect(),
            dec: self
                .dec
                .iter()
                .map(|l| BoundDecoderLayer {
                    self_attn: l.self_attn.bind(g, &self.params, frozen),
                    ln1: l.ln1.bind(g, &self.params, frozen),
                    cross_attn: l.cross_attn.bind(g, &self.params, frozen),
                    ln2: l.ln2.bind(g, &self.params, frozen),
                    ff1: l.ff1.bind(g, &self.params, frozen),
                    ff2: l.ff2.bind(g, &self.params, frozen),
                    ln3: l.ln3.bind(g, &self.params, frozen),
                })
                .collect(),
            out_proj: self.out_proj.bind(g, &self.params, frozen),
            dropout: self.config.dropout,
            heads: self.config.heads,
        }
    }
}

pub struct BoundEncoderLayer {
    attn: BoundMha,
    ln1: BoundLayerNorm,
    ff1: BoundLinear,
    ff2: BoundLinear,
    ln2: BoundLayerNorm,
}

pub struct BoundDecoderLayer {
    self_attn: BoundMha,
    ln1: BoundLayerNorm,
    cross_attn: BoundMha,
    ln2: BoundLayerNorm,
    ff1: BoundLinear,
    ff2: BoundLinear,
    ln3: BoundLayerNorm,
}

pub struct BoundTransformer {
    src_emb: BoundEmbedding,
    tgt_emb: BoundEmbedding,
    enc: Vec<BoundEncoderLayer>,
    dec: Vec<BoundDecoderLayer>,
    out_proj: BoundLinear,
    dropout: Real,
    heads: usize,
}

pub struct TrainMode<'r> {
    pub rng: &'r mut Rng,
}

impl BoundTransformer {
    /// Encode source tokens to memory rows `[S, d]`. `pad` marks source
    /// positions every attention must ignore.
    pub fn encode(
        &self,
        g: &mut Graph,
        src: SrcInput,
        pad: Option<&[bool]>,
        mut train: Option<&mut TrainMode>,
    ) -> NodeId {
        let emb = match src {
            SrcInput::Hard(ids) => self.src_emb.lookup(g, ids),
            SrcInput::Soft(weights) => self.src_emb.soft(g, weights),
        };
        let s = g.value(emb).rows();
        let d = g.value(emb).cols();
        let pe = g.input(sinusoidal_positions(s, d));
        let mut x = g.add(emb, pe);
        if let Some(t) = train.as_mut() {
            x = dropout(g, x, self.dropout, true, t.rng);
        }
        let mask = pad.map(|p| {
            assert_eq!(p.len(), s, "pad mask length mismatch");
            g.input(attention_mask(s, s, |_, j| p[j]))
        });
        for layer in &self.enc {
            let attn = layer.attn.apply(g, x, x, mask);
            let attn = match train.as_mut() {
                Some(t) => dropout(g, attn, self.dropout, true, t.rng),
                None => attn,
            };
            let res = g.add(x, attn);
            let x1 = layer.ln1.apply(g, res);
            let h = layer.ff1.apply(g, x1);
            let h = g.leaky_relu(h, LEAKY_SLOPE);
            let h = layer.ff2.apply(g, h);
            let h = match train.as_mut() {
                Some(t) => dropout(g, h, self.dropout, true, t.rng),
                None => h,
            };
            let res2 = g.add(x1, h);
            x = layer.ln2.apply(g, res2);
        }
        x
    }

    /// Decoder logits `[T, tgt_vocab]` for teacher-forced target inputs
    /// under a causal mask.
    pub fn decode_logits(
        &self,
        g: &mut Graph,
        memory: NodeId,
        tgt_input: &[usize],
        src_pad: Option<&[bool]>,
        mut train: Option<&mut TrainMode>,
    ) -> NodeId {
        assert!(!tgt_input.is_empty(), "decoder needs at least one input token");
        let emb = self.tgt_emb.lookup(g, tgt_input);
        let t = tgt_input.len();
        let d = g.value(emb).cols();
        let pe = g.input(sinusoidal_positions(t, d));
        let mut x = g.add(emb, pe);
        if let Some(tr) = train.as_mut() {
            x = dropout(g, x, self.dropout, true, tr.rng);
        }
        let causal = g.input(attention_mask(t, t, |i, j| j > i));
        let s = g.value(memory).rows();
        let cross_mask = src_pad.map(|p| g.input(attention_mask(t, s, |_, j| p[j])));
        for layer in &self.dec {
            let sa = layer.self_attn.apply(g, x, x, Some(causal));
            let sa = match train.as_mut() {
                Some(tr) => dropout(g, sa, self.dropout, true, tr.rng),
                None => sa,
            };
            let r1 = g.add(x, sa);
            let x1 = layer.ln1.apply(g, r1);
            let ca = layer.cross_attn.apply(g, x1, memory, cross_mask);
            let r2 = g.add(x1, ca);
            let x2 = layer.ln2.apply(g, r2);
            let h = layer.ff1.apply(g, x2);
            let h = g.leaky_relu(h, LEAKY_SLOPE);
            let h = layer.ff2.apply(g, h);
            let h = match train.as_mut() {
                Some(tr) => dropout(g, h, self.dropout, true, tr.rng),
                None => h,
            };
            let r3 = g.add(x2, h);
            x = layer.ln3.apply(g, r3);
        }
        self.out_proj.apply(g, x)
    }

    pub fn heads(&self) -> usize {
        self.heads
    }
}

/// Teacher-forced NLL of `targets` given `src`; `-1` targets are ignored.
pub fn seq2seq_nll(
    model: &Seq2SeqTransformer,
    src: &[usize],
    src_pad_id: Option<usize>,
    tgt_input: &[usize],
    targets: &[i64],
    reduction: Reduction,
) -> Real {
    let mut g = Graph::new();
    let bound = model.bind(&mut g, true);
    let pad_mask: Option<Vec<bool>> = src_pad_id.map(|p| src.iter().map(|&t| t == p).collect());
    let memory = bound.encode(&mut g, SrcInput::Hard(src), pad_mask.as_deref(), None);
    let logits = bound.decode_logits(&mut g, memory, tgt_input, pad_mask.as_deref(), None);
    let loss = g.cross_entropy(logits, targets, reduction);
    g.value(loss).scalar_value()
}

/// A decoded hypothesis with its total log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>, // interior tokens, no BOS/EOS
    pub log_prob: Real,
}

fn log_softmax_row(row: &[Real]) -> Vec<Real> {
    let m = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<Real>().ln();
    row.iter().map(|&x| x - lse).collect()
}

/// Next-step log-probabilities for a prefix (full decoder re-run; fine at
/// the sequence lengths this crate works with).
fn step_log_probs(
    model: &Seq2SeqTransformer,
    memory_src: &[usize],
    src_pad_id: Option<usize>,
    bos: usize,
    prefix: &[usize],
) -> Vec<Real> {
    let mut g = Graph::new();
    let bound = model.bind(&mut g, true);
    let pad_mask: Option<Vec<bool>> =
        src_pad_id.map(|p| memory_src.iter().map(|&t| t == p).collect());
    let memory = bound.encode(&mut g, SrcInput::Hard(memory_src), pad_mask.as_deref(), None);
    let mut input = Vec::with_capacity(prefix.len() + 1);
    input.push(bos);
    input.extend_from_slice(prefix);
    let logits = bound.decode_logits(&mut g, memory, &input, pad_mask.as_deref(), None);
    let v = g.value(logits);
    log_softmax_row(v.row(v.rows() - 1))
}

/// Beam search for the completed hypothesis with the highest total
/// log-probability; no length normalization. `beam_size == 1` follows the
/// greedy path exactly. At `max_len` interior tokens the end token is
/// forced and its log-probability still counts.
#[allow(clippy::too_many_arguments)]
pub fn beam_decode(
    model: &Seq2SeqTransformer,
    src: &[usize],
    src_pad_id: Option<usize>,
    bos: usize,
    eos: usize,
    beam_size: usize,
    max_len: usize,
) -> Result<Hypothesis> {
    if beam_size == 0 {
        return Err(Error::Usage("beam size must be at least 1".into()));
    }
    let mut live: Vec<Hypothesis> = vec![Hypothesis { tokens: vec![], log_prob: 0.0 }];
    let mut best_finished: Option<Hypothesis> = None;
    let note_finished = |fin: Hypothesis, best: &mut Option<Hypothesis>| {
        if best.as_ref().is_none_or(|b| fin.log_prob > b.log_prob) {
            *best = Some(fin);
        }
    };

    for _depth in 0..=max_len {
        // every extension, end token included, competes for a beam slot
        let mut pool: Vec<(Hypothesis, usize)> = Vec::new();
        for hyp in &live {
            let lp = step_log_probs(model, src, src_pad_id, bos, &hyp.tokens);
            if hyp.tokens.len() == max_len {
                // length cap: force the end token, still scoring it
                let fin =
                    Hypothesis { tokens: hyp.tokens.clone(), log_prob: hyp.log_prob + lp[eos] };
                note_finished(fin, &mut best_finished);
                continue;
            }
            for (tok, &l) in lp.iter().enumerate() {
                pool.push((
                    Hypothesis { tokens: hyp.tokens.clone(), log_prob: hyp.log_prob + l },
                    tok,
                ));
            }
        }
        pool.sort_by(|a, b| b.0.log_prob.partial_cmp(&a.0.log_prob).unwrap());
        pool.truncate(beam_size);
        let mut next_live = Vec::with_capacity(beam_size);
        for (mut hyp, tok) in pool {
            if tok == eos {
                note_finished(hyp, &mut best_finished);
            } else {
                hyp.tokens.push(tok);
                next_live.push(hyp);
            }
        }
        // a live beam's score only decreases as it grows; prune when even
        // the best live prefix cannot beat the best finished hypothesis
        if let Some(best) = &best_finished {
            next_live.retain(|c| c.log_prob > best.log_prob);
        }
        if next_live.is_empty() {
            break;
        }
        live = next_live;
    }
    best_finished.ok_or_else(|| Error::Numerical("beam search finished nothing".into()))
}

/// Greedy decode: argmax token each step until the end token or the cap.
pub fn greedy_decode(
    model: &Seq2SeqTransformer,
    src: &[usize],
    src_pad_id: Option<usize>,
    bos: usize,
    eos: usize,
    max_len: usize,
) -> Hypothesis {
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    loop {
        let lp = step_log_probs(model, src, src_pad_id, bos, &tokens);
        if tokens.len() == max_len {
            log_prob += lp[eos];
            break;
        }
        let (argmax, &l) = lp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        log_prob += l;
        if argmax == eos {
            break;
        }
        tokens.push(argmax);
    }
    Hypothesis { tokens, log_prob }
}

/// Stochastic decode used by the text-to-motion variant: sample each
/// token from the step distribution (specials masked out), terminate when
/// the end token is the argmax or at the cap.
#[allow(clippy::too_many_arguments)]
pub fn sample_decode(
    model: &Seq2SeqTransformer,
    src: &[usize],
    src_pad_id: Option<usize>,
    bos: usize,
    eos: usize,
    sampleable: &dyn Fn(usize) -> bool,
    max_len: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let mut tokens = Vec::new();
    loop {
        let lp = step_log_probs(model, src, src_pad_id, bos, &tokens);
        let argmax = lp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if argmax == eos || tokens.len() == max_len {
            break;
        }
        tokens.push(sample_masked(&lp, sampleable, rng));
    }
    tokens
}

/// Sample proportionally to `exp(log_probs)` restricted to allowed ids
/// (unnormalized log weights are fine).
pub fn sample_masked(log_probs: &[Real], allowed: &dyn Fn(usize) -> bool, rng: &mut Rng) -> usize {
    let m = log_probs
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &l)| l)
        .fold(Real::NEG_INFINITY, Real::max);
    let mut probs: Vec<(usize, Real)> = log_probs
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(i, &l)| (i, (l - m).exp()))
        .collect();
    assert!(!probs.is_empty(), "sampling mask excluded every token");
    let total: Real = probs.iter().map(|(_, p)| p).sum();
    for p in &mut probs {
        p.1 /= total;
    }
    let mut u: Real = rng.random();
    for (i, p) in &probs {
        u -= p;
        if u <= 0.0 {
            return *i;
        }
    }
    probs.last().unwrap().0
}
