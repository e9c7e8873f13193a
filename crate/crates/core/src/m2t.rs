//! Motion-to-text translation: a Transformer encoder-decoder over motion
//! tokens (source) and words (target), trained by teacher-forced NLL and
//! decoded by beam search (default width 2). The frozen model also scores
//! text given relaxed motion-token mixtures for the inverse-alignment
//! objective.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diff::{Adam, Checkpoint, Graph, NdArray, NodeId, Real, Reduction};
use crate::error::{Error, Result};
use crate::tokens::MotionTokenSequence;
use crate::transformer::{
    beam_decode, greedy_decode, BoundTransformer, Seq2SeqTransformer, SrcInput, TrainMode,
    TransformerConfig,
};
use crate::util::{derive_seed, rng_from_seed};
use crate::vocab::{TextTokenSequence, Vocabulary, BOS, EOS, PAD};

pub const DEFAULT_BEAM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M2tConfig {
    pub codebook_size: usize,
    pub transformer: TransformerConfig,
    pub max_text_len: usize,
}

impl M2tConfig {
    pub fn desk(codebook_size: usize, vocab_size: usize) -> Self {
        M2tConfig {
            codebook_size,
            transformer: TransformerConfig::desk(
                MotionTokenSequence::id_space(codebook_size),
                vocab_size,
            ),
            max_text_len: 16,
        }
    }

    pub fn paper_scale(codebook_size: usize, vocab_size: usize) -> Self {
        M2tConfig {
            codebook_size,
            transformer: TransformerConfig::paper_scale(
                MotionTokenSequence::id_space(codebook_size),
                vocab_size,
                4,
            ),
            max_text_len: 32,
        }
    }
}

pub struct MotionToText {
    pub config: M2tConfig,
    pub vocab: Vocabulary,
    pub model: Seq2SeqTransformer,
    pub trained: bool,
}

impl MotionToText {
    pub fn new(config: M2tConfig, vocab: Vocabulary, seed: u64) -> Self {
        assert_eq!(
            config.transformer.tgt_vocab,
            vocab.size(),
            "transformer target vocab must match the word vocabulary"
        );
        let model = Seq2SeqTransformer::new(config.transformer.clone(), seed);
        MotionToText { config, vocab, model, trained: false }
    }

    fn motion_pad_id(&self) -> usize {
        MotionTokenSequence::pad(self.config.codebook_size)
    }

    /// Teacher-forced NLL, mean over non-PAD target positions. The source
    /// slice is the framed motion-token ids and may carry trailing PAD.
    pub fn loss(&self, motion_ids: &[usize], text: &TextTokenSequence) -> Result<Real> {
        if text.interior().is_empty() {
            return Err(Error::Data("motion2text loss needs a non-empty target".into()));
        }
        let ids = text.ids();
        let tgt_input = &ids[..ids.len() - 1];
        let targets: Vec<i64> =
            ids[1..].iter().map(|&t| if t == PAD { -1 } else { t as i64 }).collect();
        Ok(crate::transformer::seq2seq_nll(
            &self.model,
            motion_ids,
            Some(self.motion_pad_id()),
            tgt_input,
            &targets,
            Reduction::Mean,
        ))
    }

    /// Argmax decoding until EOS or the cap; deterministic.
    pub fn caption_greedy(&self, motion: &MotionTokenSequence) -> (TextTokenSequence, Real) {
        self.caption_greedy_max(motion, self.config.max_text_len)
    }

    pub fn caption_greedy_max(
        &self,
        motion: &MotionTokenSequence,
        max_len: usize,
    ) -> (TextTokenSequence, Real) {
        let hyp = greedy_decode(
            &self.model,
            motion.ids(),
            Some(self.motion_pad_id()),
            BOS,
            EOS,
            max_len,
        );
        (self.frame_words(hyp.tokens), hyp.log_prob)
    }

    /// Beam search with total log-probability scoring.
    pub fn caption_beam(
        &self,
        motion: &MotionTokenSequence,
        beam_size: usize,
        max_len: usize,
    ) -> Result<(TextTokenSequence, Real)> {
        let hyp = beam_decode(
            &self.model,
            motion.ids(),
            Some(self.motion_pad_id()),
            BOS,
            EOS,
            beam_size,
            max_len,
        )?;
        Ok((self.frame_words(hyp.tokens), hyp.log_prob))
    }

    fn frame_words(&self, interior: Vec<usize>) -> TextTokenSequence {
        let mut ids = Vec::with_capacity(interior.len() + 2);
        ids.push(BOS);
        ids.extend(interior.into_iter().map(|t| if t == BOS || t == PAD { crate::vocab::UNK } else { t }));
        ids.push(EOS);
        TextTokenSequence::new(ids).expect("framed caption")
    }

    /// Total log-probability of `text` given hard motion-token ids.
    /// Parameters stay frozen.
    pub fn score_text_hard(&self, motion_ids: &[usize], text: &TextTokenSequence) -> Real {
        let mut g = Graph::new();
        let bound = self.model.bind(&mut g, true);
        let node = self.score_with_bound(&mut g, &bound, SrcInput::Hard(motion_ids), text);
        g.value(node).scalar_value()
    }

    /// Total log-probability of `text` given simplex-weighted motion-token
    /// mixtures `[S, K+3]`. Gradients flow to the simplex input, never to
    /// the model.
    pub fn score_text_soft(&self, soft_rows: &NdArray, text: &TextTokenSequence) -> Result<Real> {
        self.validate_simplex(soft_rows)?;
        let mut g = Graph::new();
        let bound = self.model.bind(&mut g, true);
        let soft = g.input(soft_rows.clone());
        let node = self.score_with_bound(&mut g, &bound, SrcInput::Soft(soft), text);
        Ok(g.value(node).scalar_value())
    }

    pub fn validate_simplex(&self, soft_rows: &NdArray) -> Result<()> {
        if soft_rows.ndim() != 2
            || soft_rows.cols() != MotionTokenSequence::id_space(self.config.codebook_size)
        {
            return Err(Error::Data(format!(
                "soft motion input must be [S, {}], got {:?}",
                MotionTokenSequence::id_space(self.config.codebook_size),
                soft_rows.shape()
            )));
        }
        for i in 0..soft_rows.rows() {
            let s: Real = soft_rows.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::Data(format!("simplex row {i} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }

    /// Graph-level scoring for the inverse-alignment path: the model is
    /// bound frozen by the caller, `src` rows feed the soft source
    /// embedding, and the returned node is `sum_i log p(x_i | x_<i, s)`.
    pub fn score_with_bound(
        &self,
        g: &mut Graph,
        bound: &BoundTransformer,
        src: SrcInput,
        text: &TextTokenSequence,
    ) -> NodeId {
        let memory = bound.encode(g, src, None, None);
        let ids = text.ids();
        let tgt_input = &ids[..ids.len() - 1];
        let targets: Vec<i64> =
            ids[1..].iter().map(|&t| if t == PAD { -1 } else { t as i64 }).collect();
        let logits = bound.decode_logits(g, memory, tgt_input, None, None);
        let nll = g.cross_entropy(logits, &targets, Reduction::Sum);
        g.scale(nll, -1.0)
    }

    pub fn save(&self, path: &std::path::Path, meta: serde_json::Value) -> Result<()> {
        let hyper = serde_json::json!({
            "config": &self.config,
            "vocab": self.vocab.words(),
            "trained": self.trained,
            "meta": meta,
        });
        let mut ck = Checkpoint::new("m2t", hyper);
        ck.push_params("", &self.model.params);
        ck.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind("m2t")?;
        let config: M2tConfig = serde_json::from_value(ck.hyper["config"].clone())?;
        let words: Vec<String> = serde_json::from_value(ck.hyper["vocab"].clone())?;
        let vocab = Vocabulary::from_words(words);
        let mut m = MotionToText::new(config, vocab, 0);
        ck.load_params("", &mut m.model.params)?;
        m.trained = ck.hyper["trained"].as_bool().unwrap_or(false);
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M2tTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub seed: u64,
    pub grad_clip: Real,
    pub log_every: usize,
}

impl Default for M2tTrainConfig {
    fn default() -> Self {
        M2tTrainConfig {
            steps: 1500,
            batch_size: 8,
            lr: 2e-4,
            seed: 0,
            grad_clip: 1.0,
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct M2tTrainRecord {
    pub step: usize,
    pub loss: Real,
}

/// Teacher-forced training over (motion tokens, text) pairs.
pub fn train_m2t(
    model: &mut MotionToText,
    pairs: &[(MotionTokenSequence, TextTokenSequence)],
    cfg: &M2tTrainConfig,
) -> Result<Vec<M2tTrainRecord>> {
    assert!(!pairs.is_empty(), "train_m2t: empty pair set");
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x6d32));
    let mut opt = Adam::new(&model.model.params, cfg.lr);
    let mut curve = Vec::new();
    let pad = MotionTokenSequence::pad(model.config.codebook_size);

    for step in 0..cfg.steps {
        model.model.params.zero_grads();
        let mut g = Graph::new();
        let bound = model.model.bind(&mut g, false);
        let mut losses = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let (motion, text) = &pairs[rng.random_range(0..pairs.len())];
            if text.interior().is_empty() {
                continue;
            }
            let mut train_mode = TrainMode { rng: &mut rng };
            let pad_mask: Vec<bool> = motion.ids().iter().map(|&t| t == pad).collect();
            let memory = bound.encode(
                &mut g,
                SrcInput::Hard(motion.ids()),
                Some(&pad_mask),
                Some(&mut train_mode),
            );
            let ids = text.ids();
            let tgt_input = &ids[..ids.len() - 1];
            let targets: Vec<i64> =
                ids[1..].iter().map(|&t| if t == PAD { -1 } else { t as i64 }).collect();
            let logits = bound.decode_logits(
                &mut g,
                memory,
                tgt_input,
                Some(&pad_mask),
                Some(&mut train_mode),
            );
            losses.push(g.cross_entropy(logits, &targets, Reduction::Mean));
        }
        let total = g.add_all(&losses);
        let loss = g.scale(total, 1.0 / losses.len() as Real);
        let loss_val = g.value(loss).scalar_value();
        if !loss_val.is_finite() {
            return Err(Error::Numerical(format!(
                "motion2text training diverged at step {step}"
            )));
        }
        g.backward(loss);
        g.accumulate_param_grads(&mut model.model.params);
        crate::diff::clip_global_norm(&mut model.model.params, cfg.grad_clip);
        opt.step(&mut model.model.params)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            curve.push(M2tTrainRecord { step, loss: loss_val });
        }
    }
    model.trained = true;
    Ok(curve)
}
