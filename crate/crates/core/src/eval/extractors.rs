//! Contrastive motion/text feature extractors: two bi-directional GRUs
//! whose final states project to a shared feature space where matched
//! pairs sit close and mismatched pairs at least `margin` apart (squared
//! distance). Trained on the train split only; frozen for every metric.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::PoseSequence;
use crate::diff::{Adam, Checkpoint, Graph, NodeId, ParamSet, Real};
use crate::error::{Error, Result};
use crate::nn::{BiGru, Embedding, Linear};
use crate::util::{derive_seed, rng_from_seed, Rng};
use crate::vocab::TextTokenSequence;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtractorConfig {
    pub pose_channels: usize,
    pub vocab_size: usize,
    pub word_emb: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    pub margin: Real,
}

impl ExtractorConfig {
    pub fn desk(pose_channels: usize, vocab_size: usize) -> Self {
        ExtractorConfig {
            pose_channels,
            vocab_size,
            word_emb: 64,
            hidden: 128,
            feature_dim: 64,
            margin: 10.0,
        }
    }

    pub fn paper_scale(pose_channels: usize, vocab_size: usize) -> Self {
        ExtractorConfig {
            pose_channels,
            vocab_size,
            word_emb: 300,
            hidden: 1024,
            feature_dim: 512,
            margin: 10.0,
        }
    }
}

pub struct FeatureExtractors {
    pub config: ExtractorConfig,
    pub params: ParamSet,
    motion_gru: BiGru,
    motion_proj: Linear,
    word_emb: Embedding,
    text_gru: BiGru,
    text_proj: Linear,
    pub trained: bool,
}

impl FeatureExtractors {
    pub fn new(config: ExtractorConfig, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut ps = ParamSet::new();
        let motion_gru = BiGru::new(&mut ps, "motion.gru", config.pose_channels, config.hidden, &mut rng);
        let motion_proj =
            Linear::new(&mut ps, "motion.proj", 2 * config.hidden, config.feature_dim, true, &mut rng);
        let word_emb = Embedding::new(&mut ps, "text.emb", config.vocab_size, config.word_emb, &mut rng);
        let text_gru = BiGru::new(&mut ps, "text.gru", config.word_emb, config.hidden, &mut rng);
        let text_proj =
            Linear::new(&mut ps, "text.proj", 2 * config.hidden, config.feature_dim, true, &mut rng);
        FeatureExtractors {
            config,
            params: ps,
            motion_gru,
            motion_proj,
            word_emb,
            text_gru,
            text_proj,
            trained: false,
        }
    }

    fn motion_feature_node(&self, g: &mut Graph, motion: &PoseSequence, frozen: bool) -> NodeId {
        let frames = g.input(motion.frames.clone());
        let rows: Vec<NodeId> = (0..motion.num_frames()).map(|i| g.row(frames, i)).collect();
        let gru = self.motion_gru.bind(g, &self.params, frozen);
        let (_, sentence) = gru.run(g, &rows);
        let proj = self.motion_proj.bind(g, &self.params, frozen);
        proj.apply(g, sentence)
    }

    fn text_feature_node(&self, g: &mut Graph, text: &TextTokenSequence, frozen: bool) -> NodeId {
        let emb = self.word_emb.bind(g, &self.params, frozen);
        let table = emb.lookup(g, text.interior());
        let rows: Vec<NodeId> = (0..text.interior().len()).map(|i| g.row(table, i)).collect();
        let gru = self.text_gru.bind(g, &self.params, frozen);
        let (_, sentence) = gru.run(g, &rows);
        let proj = self.text_proj.bind(g, &self.params, frozen);
        proj.apply(g, sentence)
    }

    /// Feature of a normalized pose sequence.
    pub fn motion_feature(&self, motion: &PoseSequence) -> Result<Vec<Real>> {
        if motion.channels() != self.config.pose_channels {
            return Err(Error::Data(format!(
                "motion feature: {} channels, extractor expects {}",
                motion.channels(),
                self.config.pose_channels
            )));
        }
        if motion.num_frames() == 0 {
            return Err(Error::Data("motion feature: empty motion".into()));
        }
        let mut g = Graph::new();
        let node = self.motion_feature_node(&mut g, motion, true);
        Ok(g.value(node).data().to_vec())
    }

    pub fn text_feature(&self, text: &TextTokenSequence) -> Result<Vec<Real>> {
        if text.interior().is_empty() {
            return Err(Error::Data("text feature: empty interior".into()));
        }
        let mut g = Graph::new();
        let node = self.text_feature_node(&mut g, text, true);
        Ok(g.value(node).data().to_vec())
    }

    pub fn save(&self, path: &std::path::Path, meta: serde_json::Value) -> Result<()> {
        let hyper = serde_json::json!({
            "config": &self.config,
            "trained": self.trained,
            "meta": meta,
        });
        let mut ck = Checkpoint::new("extractors", hyper);
        ck.push_params("", &self.params);
        ck.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind("extractors")?;
        let config: ExtractorConfig = serde_json::from_value(ck.hyper["config"].clone())?;
        let mut e = FeatureExtractors::new(config, 0);
        ck.load_params("", &mut e.params)?;
        e.trained = ck.hyper["trained"].as_bool().unwrap_or(false);
        Ok(e)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub seed: u64,
    pub grad_clip: Real,
    pub log_every: usize,
    /// Cap on motion frames per training sample (random window).
    pub max_frames: usize,
}

impl Default for ExtractorTrainConfig {
    fn default() -> Self {
        ExtractorTrainConfig {
            steps: 800,
            batch_size: 8,
            lr: 4e-4,
            seed: 0,
            grad_clip: 1.0,
            log_every: 100,
            max_frames: 48,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractorTrainRecord {
    pub step: usize,
    pub loss: Real,
}

/// Train on (normalized motion, tokenized description) pairs from the
/// train split. Each batch draws one matched and one mismatched pairing
/// per slot.
pub fn train_extractors(
    model: &mut FeatureExtractors,
    pairs: &[(PoseSequence, Vec<TextTokenSequence>)],
    cfg: &ExtractorTrainConfig,
) -> Result<Vec<ExtractorTrainRecord>> {
    if pairs.len() < 2 {
        return Err(Error::Data("extractor training needs at least 2 entries".into()));
    }
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0xE87));
    let mut opt = Adam::new(&model.params, cfg.lr);
    let margin = model.config.margin;
    let mut curve = Vec::new();

    for step in 0..cfg.steps {
        model.params.zero_grads();
        let mut g = Graph::new();
        let mut losses = Vec::new();
        for _ in 0..cfg.batch_size {
            let i = rng.random_range(0..pairs.len());
            let mut j = rng.random_range(0..pairs.len());
            while j == i {
                j = rng.random_range(0..pairs.len());
            }
            let motion = window(&pairs[i].0, cfg.max_frames, &mut rng);
            let text = &pairs[i].1[rng.random_range(0..pairs[i].1.len())];
            let wrong_text = &pairs[j].1[rng.random_range(0..pairs[j].1.len())];

            let mf = model.motion_feature_node(&mut g, &motion, false);
            let tf = model.text_feature_node(&mut g, text, false);
            let wf = model.text_feature_node(&mut g, wrong_text, false);

            // matched: (d^2)^2
            let diff = g.sub(mf, tf);
            let sq = g.mul(diff, diff);
            let d2 = g.sum(sq);
            let matched = g.mul(d2, d2);
            // mismatched: max(0, margin - d^2)^2
            let diff_w = g.sub(mf, wf);
            let sq_w = g.mul(diff_w, diff_w);
            let d2_w = g.sum(sq_w);
            let neg = g.scale(d2_w, -1.0);
            let m_node = g.scalar(margin);
            let gap = g.add(m_node, neg);
            let hinge = g.leaky_relu(gap, 0.0);
            let mismatched = g.mul(hinge, hinge);

            losses.push(g.add(matched, mismatched));
        }
        let total = g.add_all(&losses);
        let loss = g.scale(total, 1.0 / losses.len() as Real);
        let loss_val = g.value(loss).scalar_value();
        if !loss_val.is_finite() {
            return Err(Error::Numerical("extractor training diverged".into()));
        }
        g.backward(loss);
        g.accumulate_param_grads(&mut model.params);
        crate::diff::clip_global_norm(&mut model.params, cfg.grad_clip);
        opt.step(&mut model.params)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            curve.push(ExtractorTrainRecord { step, loss: loss_val });
        }
    }
    model.trained = true;
    Ok(curve)
}

fn window(m: &PoseSequence, max_frames: usize, rng: &mut Rng) -> PoseSequence {
    let t = m.num_frames();
    if t <= max_frames {
        return m.clone();
    }
    let start = rng.random_range(0..=t - max_frames);
    m.slice_frames(start, max_frames)
}
