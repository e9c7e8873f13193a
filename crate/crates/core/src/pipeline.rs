//! Staged pipeline behind the CLI: corpus synthesis, the four training
//! stages with dependency checks and manifests, and the generation /
//! captioning / evaluation entry points. Integration tests drive these
//! functions directly.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{
    mirror_entry, random_crop, synth_corpus, Corpus, CorpusEntry, NormStats, PoseSequence, Split,
};
use crate::diff::{Checkpoint, Real};
use crate::error::{Error, Result};
use crate::eval::{evaluate_suite, FeatureExtractors, MetricReport, SuiteModels};
use crate::m2t::MotionToText;
use crate::manifest::{guard_overwrite, ExperimentManifest};
use crate::quantizer::{eval_reconstruction, train_quantizer, MotionQuantizer};
use crate::t2m::{train_t2m, train_t2m_transformer, T2mTransformer, TextToMotion};
use crate::tokens::MotionTokenSequence;
use crate::util::{derive_seed, rng_from_seed};
use crate::vocab::{TextTokenSequence, Vocabulary};

pub const VQ_CKPT: &str = "vq.ckpt";
pub const M2T_CKPT: &str = "m2t.ckpt";
pub const T2M_CKPT: &str = "t2m.ckpt";
pub const T2M_TRANSFORMER_CKPT: &str = "t2m_transformer.ckpt";
pub const EXTRACTORS_CKPT: &str = "extractors.ckpt";

pub fn ckpt_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn require(path: &Path, what: &str, hint: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::Dependency(format!(
            "{what} checkpoint not found at {}; run `motiontext train {hint}` first",
            path.display()
        )));
    }
    Ok(())
}

// ── corpus ──────────────────────────────────────────────────────────

pub fn cmd_synth_data(cfg: &RunConfig, out: &Path) -> Result<(usize, usize, usize)> {
    let spec = cfg.synth_spec()?;
    let corpus = synth_corpus(&spec, cfg.seed()?)?;
    corpus.save(out)?;
    Ok(corpus.split_counts())
}

pub fn load_corpus(path: &Path) -> Result<(Corpus, String)> {
    let corpus = Corpus::load(path)?;
    let hash = corpus.content_hash();
    Ok((corpus, hash))
}

/// Train entries plus mirrored copies (when enabled).
fn augmented_train(corpus: &Corpus, cfg: &RunConfig) -> Result<Vec<CorpusEntry>> {
    let mut entries: Vec<CorpusEntry> =
        corpus.split_entries(Split::Train).into_iter().cloned().collect();
    if cfg.get_bool("augment.mirror")? {
        let spec = crate::data::synth::mirror_spec();
        let mirrored: Vec<CorpusEntry> = entries
            .iter()
            .map(|e| {
                let mut m = mirror_entry(e, &corpus.layout, &spec);
                m.id = format!("{}-mirror", e.id);
                m
            })
            .collect();
        entries.extend(mirrored);
    }
    Ok(entries)
}

/// Vocabulary over the augmented train texts (mirroring can only swap
/// existing words, so this equals the corpus vocabulary).
fn train_vocab(corpus: &Corpus) -> Vocabulary {
    corpus.vocab.clone()
}

fn write_curve<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for r in rows {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

// ── training stages ─────────────────────────────────────────────────

pub fn train_stage_vq(
    cfg: &RunConfig,
    corpus: &Corpus,
    corpus_hash: &str,
    ckpt_dir: &Path,
    force: bool,
) -> Result<PathBuf> {
    std::fs::create_dir_all(ckpt_dir)?;
    let path = ckpt_path(ckpt_dir, VQ_CKPT);
    guard_overwrite(&path, &cfg.hash(), force)?;

    let entries = augmented_train(corpus, cfg)?;
    let base = Corpus::from_entries(corpus.layout, entries);
    let stats = NormStats::from_train_split(&base);
    let motions: Vec<PoseSequence> = base
        .entries
        .iter()
        .map(|e| stats.normalize(&e.motion))
        .collect::<Result<_>>()?;

    let mut model =
        MotionQuantizer::new(cfg.quantizer_config(corpus.layout.channels())?, cfg.seed()?);
    let curve = train_quantizer(&mut model, &motions, &cfg.quantizer_train_config()?)?;
    write_curve(&ckpt_path(ckpt_dir, "vq_loss.csv"), &curve)?;

    // held-out reconstruction + codebook usage export
    let val: Vec<PoseSequence> = corpus
        .split_entries(Split::Val)
        .iter()
        .map(|e| stats.normalize(&e.motion))
        .collect::<Result<_>>()?;
    let val_mae = if val.is_empty() { Real::NAN } else { eval_reconstruction(&model, &val)? };
    let usage: Vec<u64> = model.usage_counts.clone();
    std::fs::write(
        ckpt_path(ckpt_dir, "vq_codebook_usage.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "usage_counts": usage,
            "val_reconstruction_mae": val_mae as f64,
        }))?,
    )?;

    let meta = serde_json::json!({ "config_hash": cfg.hash(), "corpus_hash": corpus_hash });
    model.save(&path, &stats, meta)?;
    ExperimentManifest::new("vq", &cfg.hash(), corpus_hash).save(&path)?;
    Ok(path)
}

pub fn train_stage_extractors(
    cfg: &RunConfig,
    corpus: &Corpus,
    corpus_hash: &str,
    ckpt_dir: &Path,
    force: bool,
) -> Result<PathBuf> {
    std::fs::create_dir_all(ckpt_dir)?;
    let path = ckpt_path(ckpt_dir, EXTRACTORS_CKPT);
    guard_overwrite(&path, &cfg.hash(), force)?;

    let entries = augmented_train(corpus, cfg)?;
    let base = Corpus::from_entries(corpus.layout, entries);
    let stats = NormStats::from_train_split(&base);
    let vocab = train_vocab(corpus);
    let pairs: Vec<(PoseSequence, Vec<TextTokenSequence>)> = base
        .entries
        .iter()
        .map(|e| {
            let m = stats.normalize(&e.motion)?;
            let texts = e.texts.iter().map(|t| vocab.encode(t).0).collect();
            Ok((m, texts))
        })
        .collect::<Result<_>>()?;

    let mut model = FeatureExtractors::new(
        cfg.extractor_config(corpus.layout.channels(), vocab.size())?,
        cfg.seed()?,
    );
    let curve = crate::eval::train_extractors(&mut model, &pairs, &cfg.extractor_train_config()?)?;
    write_curve(&ckpt_path(ckpt_dir, "extractors_loss.csv"), &curve)?;

    let meta = serde_json::json!({
        "config_hash": cfg.hash(),
        "corpus_hash": corpus_hash,
        "vocab": vocab.words(),
    });
    model.save(&path, meta)?;
    ExperimentManifest::new("extractors", &cfg.hash(), corpus_hash).save(&path)?;
    Ok(path)
}

/// Tokenized training pairs: each augmented train entry contributes its
/// trimmed motion plus `augment.crop_variants` random crops, every token
/// sequence paired with every description.
fn token_text_pairs(
    corpus: &Corpus,
    cfg: &RunConfig,
    vq: &MotionQuantizer,
    stats: &NormStats,
) -> Result<Vec<(MotionTokenSequence, TextTokenSequence)>> {
    let entries = augmented_train(corpus, cfg)?;
    let vocab = train_vocab(corpus);
    let crop_variants = cfg.get_usize("augment.crop_variants")?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed()?, 0xC209));
    let mut pairs = Vec::new();
    for e in &entries {
        let norm = stats.normalize(&e.motion)?;
        let mut motions = vec![norm.trim_to_multiple_of_4()];
        for _ in 0..crop_variants {
            if norm.num_frames() > 8 {
                motions.push(random_crop(&norm, &mut rng)?);
            }
        }
        let texts: Vec<TextTokenSequence> = e.texts.iter().map(|t| vocab.encode(t).0).collect();
        for m in &motions {
            if m.num_frames() < 4 {
                continue;
            }
            let tokens = vq.tokenize(m)?;
            for t in &texts {
                if !t.interior().is_empty() {
                    pairs.push((tokens.clone(), t.clone()));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Data("no usable training pairs after tokenization".into()));
    }
    Ok(pairs)
}

pub fn train_stage_m2t(
    cfg: &RunConfig,
    corpus: &Corpus,
    corpus_hash: &str,
    ckpt_dir: &Path,
    force: bool,
) -> Result<PathBuf> {
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    let path = ckpt_path(ckpt_dir, M2T_CKPT);
    guard_overwrite(&path, &cfg.hash(), force)?;

    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let pairs = token_text_pairs(corpus, cfg, &vq, &stats)?;
    let vocab = train_vocab(corpus);
    let mut model = MotionToText::new(
        cfg.m2t_config(vq.config.codebook_size, vocab.size())?,
        vocab,
        cfg.seed()?,
    );
    let curve = crate::m2t::train_m2t(&mut model, &pairs, &cfg.m2t_train_config()?)?;
    write_curve(&ckpt_path(ckpt_dir, "m2t_loss.csv"), &curve)?;

    let meta = serde_json::json!({ "config_hash": cfg.hash(), "corpus_hash": corpus_hash });
    model.save(&path, meta)?;
    ExperimentManifest::new("m2t", &cfg.hash(), corpus_hash)
        .with_upstream("vq", &vq_path)?
        .save(&path)?;
    Ok(path)
}

pub fn train_stage_t2m(
    cfg: &RunConfig,
    corpus: &Corpus,
    corpus_hash: &str,
    ckpt_dir: &Path,
    inverse_alignment: bool,
    force: bool,
) -> Result<PathBuf> {
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    let backbone = cfg.get_str("t2m.backbone")?.to_string();

    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let raw_pairs = token_text_pairs(corpus, cfg, &vq, &stats)?;
    let pairs: Vec<(TextTokenSequence, MotionTokenSequence)> =
        raw_pairs.into_iter().map(|(m, t)| (t, m)).collect();
    let vocab = train_vocab(corpus);

    match backbone.as_str() {
        "gru" => {
            let path = ckpt_path(ckpt_dir, T2M_CKPT);
            guard_overwrite(&path, &cfg.hash(), force)?;
            let m2t = if inverse_alignment {
                let m2t_path = ckpt_path(ckpt_dir, M2T_CKPT);
                if !m2t_path.exists() {
                    return Err(Error::Dependency(
                        "t2m training with inverse alignment needs a trained motion2text model; \
                         run `motiontext train m2t` first or pass --no-inverse-alignment"
                            .into(),
                    ));
                }
                Some(MotionToText::load(&m2t_path)?)
            } else {
                None
            };
            let mut model =
                TextToMotion::new(cfg.t2m_config(vocab.size(), vq.config.codebook_size)?, cfg.seed()?);
            let curve = train_t2m(
                &mut model,
                m2t.as_ref(),
                &pairs,
                &cfg.t2m_train_config(inverse_alignment)?,
            )?;
            write_curve(&ckpt_path(ckpt_dir, "t2m_loss.csv"), &curve)?;
            let meta = serde_json::json!({
                "config_hash": cfg.hash(),
                "corpus_hash": corpus_hash,
                "vocab": vocab.words(),
                "inverse_alignment": inverse_alignment,
            });
            model.save(&path, meta)?;
            let mut manifest = ExperimentManifest::new("t2m", &cfg.hash(), corpus_hash)
                .with_upstream("vq", &vq_path)?;
            if inverse_alignment {
                manifest = manifest.with_upstream("m2t", &ckpt_path(ckpt_dir, M2T_CKPT))?;
            }
            manifest.save(&path)?;
            Ok(path)
        }
        "transformer" => {
            if inverse_alignment {
                return Err(Error::Usage(
                    "inverse alignment is only examined on the GRU backbone; \
                     use t2m.backbone = gru or pass --no-inverse-alignment"
                        .into(),
                ));
            }
            let path = ckpt_path(ckpt_dir, T2M_TRANSFORMER_CKPT);
            guard_overwrite(&path, &cfg.hash(), force)?;
            let tconfig = crate::transformer::TransformerConfig {
                src_vocab: vocab.size(),
                tgt_vocab: MotionTokenSequence::id_space(vq.config.codebook_size),
                d_model: cfg.get_usize("m2t.d_model")?,
                heads: cfg.get_usize("m2t.heads")?,
                enc_layers: cfg.get_usize("m2t.enc_layers")?,
                dec_layers: cfg.get_usize("m2t.dec_layers")?,
                d_ff: cfg.get_usize("m2t.d_ff")?,
                dropout: cfg.get_real("m2t.dropout")?,
                max_len: 256,
            };
            let mut model = T2mTransformer {
                config: tconfig.clone(),
                codebook_size: vq.config.codebook_size,
                max_tokens: cfg.get_usize("t2m.max_tokens")?,
                model: crate::transformer::Seq2SeqTransformer::new(tconfig, cfg.seed()?),
                trained: false,
            };
            let mut tcfg = cfg.m2t_train_config()?;
            tcfg.steps = cfg.get_usize("t2m.steps")?;
            tcfg.lr = cfg.get_real("t2m.lr")?;
            let curve = train_t2m_transformer(&mut model, &pairs, &tcfg)?;
            write_curve(&ckpt_path(ckpt_dir, "t2m_transformer_loss.csv"), &curve)?;
            let meta = serde_json::json!({
                "config_hash": cfg.hash(),
                "corpus_hash": corpus_hash,
                "vocab": vocab.words(),
            });
            model.save(&path, meta)?;
            ExperimentManifest::new("t2m-transformer", &cfg.hash(), corpus_hash)
                .with_upstream("vq", &vq_path)?
                .save(&path)?;
            Ok(path)
        }
        other => Err(Error::Usage(format!(
            "unknown t2m backbone {other:?}; expected gru or transformer"
        ))),
    }
}

// ── inference commands ──────────────────────────────────────────────

#[derive(Debug, Serialize)]
pub struct TokenRecord {
    pub motion_id: String,
    pub token_ids: Vec<usize>,
    pub source_frame_count: usize,
}

pub fn run_tokenize(ckpt_dir: &Path, corpus_path: &Path, out: &Path) -> Result<usize> {
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let (corpus, _) = load_corpus(corpus_path)?;
    let mut f = std::fs::File::create(out)?;
    let mut count = 0;
    for e in &corpus.entries {
        let norm = stats.normalize(&e.motion)?;
        let tokens = vq.tokenize(&norm)?;
        let rec = TokenRecord {
            motion_id: e.id.clone(),
            token_ids: tokens.ids().to_vec(),
            source_frame_count: e.motion.num_frames(),
        };
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        count += 1;
    }
    Ok(count)
}

#[derive(Debug, Serialize)]
pub struct CaptionRecord {
    pub motion_id: String,
    pub text: String,
    pub log_prob: f64,
}

pub fn run_caption(
    ckpt_dir: &Path,
    motions_path: &Path,
    beam: usize,
    out: &Path,
) -> Result<Vec<CaptionRecord>> {
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    let m2t_path = ckpt_path(ckpt_dir, M2T_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    require(&m2t_path, "motion2text", "m2t")?;
    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let m2t = MotionToText::load(&m2t_path)?;
    let (corpus, _) = load_corpus(motions_path)?;
    if corpus.layout.channels() != vq.config.channels {
        return Err(Error::Data(format!(
            "motion file has {} channels, quantizer expects {}",
            corpus.layout.channels(),
            vq.config.channels
        )));
    }
    let mut records = Vec::new();
    let mut f = std::fs::File::create(out)?;
    for e in &corpus.entries {
        let norm = stats.normalize(&e.motion)?;
        let tokens = vq.tokenize(&norm)?;
        let (caption, log_prob) = if beam == 1 {
            m2t.caption_greedy(&tokens)
        } else {
            m2t.caption_beam(&tokens, beam, m2t.config.max_text_len)?
        };
        let rec = CaptionRecord {
            motion_id: e.id.clone(),
            text: m2t.vocab.decode(&caption),
            log_prob: log_prob as f64,
        };
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Debug, Serialize)]
pub struct GenerateRecord {
    pub text: String,
    pub seed: u64,
    pub token_ids: Vec<usize>,
    pub frames: Vec<Vec<f64>>,
    /// Words that fell outside the vocabulary and were read as UNK.
    pub unknown_words: Vec<String>,
}

pub fn run_generate(
    ckpt_dir: &Path,
    text: &str,
    seeds: &[u64],
    out: &Path,
    plot_dir: Option<&Path>,
) -> Result<Vec<GenerateRecord>> {
    if text.trim().is_empty() {
        return Err(Error::Usage("generate needs a non-empty text description".into()));
    }
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    let t2m_path = ckpt_path(ckpt_dir, T2M_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    require(&t2m_path, "text2motion", "t2m")?;
    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let t2m = TextToMotion::load(&t2m_path)?;
    let vocab = vocab_from_checkpoint(&t2m_path)?;

    let (encoded, unknown) = vocab.encode(text);
    if encoded.interior().is_empty() {
        return Err(Error::Usage("text contains no usable words".into()));
    }
    let mut records = Vec::new();
    let mut f = std::fs::File::create(out)?;
    for &seed in seeds {
        let mut rng = rng_from_seed(seed);
        let tokens = t2m.generate(&encoded, t2m.config.max_tokens, &mut rng)?;
        let frames: Vec<Vec<f64>> = if tokens.interior_len() == 0 {
            Vec::new()
        } else {
            let pose = vq.detokenize(&tokens)?;
            let denorm = stats.denormalize(&pose)?;
            (0..denorm.num_frames())
                .map(|t| denorm.frames.row(t).iter().map(|&v| v as f64).collect())
                .collect()
        };
        if let Some(dir) = plot_dir {
            if !frames.is_empty() {
                std::fs::create_dir_all(dir)?;
                let pose = vq.detokenize(&tokens)?;
                let denorm = stats.denormalize(&pose)?;
                let svg = trajectory_svg(&denorm, &crate::data::PoseFeatureLayout::new(
                    crate::data::synth::JOINTS,
                ));
                std::fs::write(dir.join(format!("gen_seed{seed}.svg")), svg)?;
            }
        }
        let rec = GenerateRecord {
            text: text.to_string(),
            seed,
            token_ids: tokens.ids().to_vec(),
            frames,
            unknown_words: unknown.clone(),
        };
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        records.push(rec);
    }
    Ok(records)
}

fn vocab_from_checkpoint(path: &Path) -> Result<Vocabulary> {
    let ck = Checkpoint::load(path)?;
    let words: Vec<String> = serde_json::from_value(ck.hyper["meta"]["vocab"].clone())
        .map_err(|_| Error::Checkpoint(format!("{}: no vocabulary in metadata", path.display())))?;
    Ok(Vocabulary::from_words(words))
}

#[derive(Debug, Serialize)]
pub struct TokenContextRecord {
    pub token_id: usize,
    pub frames: Vec<Vec<f64>>,
}

pub fn run_token_contexts(ckpt_dir: &Path, out: &Path) -> Result<usize> {
    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    require(&vq_path, "quantizer", "vq")?;
    let (vq, stats) = MotionQuantizer::load(&vq_path)?;
    let mut f = std::fs::File::create(out)?;
    for id in 0..vq.config.codebook_size {
        let seg = vq.token_context(id)?;
        let denorm = stats.denormalize(&seg)?;
        let rec = TokenContextRecord {
            token_id: id,
            frames: (0..denorm.num_frames())
                .map(|t| denorm.frames.row(t).iter().map(|&v| v as f64).collect())
                .collect(),
        };
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(vq.config.codebook_size)
}

// ── evaluation ──────────────────────────────────────────────────────

pub fn run_evaluate(
    cfg: &RunConfig,
    corpus: &Corpus,
    corpus_hash: &str,
    ckpt_dir: &Path,
    out_dir: &Path,
) -> Result<MetricReport> {
    let ex_path = ckpt_path(ckpt_dir, EXTRACTORS_CKPT);
    require(&ex_path, "feature extractors", "extractors")?;
    let extractors = FeatureExtractors::load(&ex_path)?;

    let vq_path = ckpt_path(ckpt_dir, VQ_CKPT);
    let vq_loaded = vq_path.exists().then(|| MotionQuantizer::load(&vq_path)).transpose()?;
    let m2t_path = ckpt_path(ckpt_dir, M2T_CKPT);
    let m2t = m2t_path.exists().then(|| MotionToText::load(&m2t_path)).transpose()?;
    let t2m_path = ckpt_path(ckpt_dir, T2M_CKPT);
    let t2m = t2m_path.exists().then(|| TextToMotion::load(&t2m_path)).transpose()?;

    let stats = match &vq_loaded {
        Some((_, stats)) => stats.clone(),
        None => {
            // no quantizer lineage: evaluation still needs normalization
            let entries = augmented_train(corpus, cfg)?;
            let base = Corpus::from_entries(corpus.layout, entries);
            NormStats::from_train_split(&base)
        }
    };
    let models = SuiteModels {
        vq: vq_loaded.as_ref().map(|(m, _)| m),
        m2t: m2t.as_ref(),
        t2m: t2m.as_ref(),
        extractors: &extractors,
    };
    let mut report = evaluate_suite(&models, corpus, &stats, &cfg.suite_config()?)?;

    // note lineage mismatches
    for (name, path) in [("vq", &vq_path), ("m2t", &m2t_path), ("t2m", &t2m_path)] {
        if path.exists() {
            if let Ok(m) = ExperimentManifest::load(path) {
                if m.corpus_hash != corpus_hash {
                    report.errors.push((
                        format!("{name} lineage"),
                        format!("trained on corpus {} but evaluating {}", m.corpus_hash, corpus_hash),
                    ));
                }
            }
        }
    }

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.txt"), report.to_text())?;
    std::fs::write(out_dir.join("report.csv"), report.to_csv())?;
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let mut manifest = ExperimentManifest::new("evaluation", &cfg.hash(), corpus_hash);
    manifest.report = Some(out_dir.join("report.csv").display().to_string());
    manifest.save(&out_dir.join("report"))?;
    Ok(report)
}

/// Root trajectory (top-down) and root-height curve reconstructed from
/// the feature channels, as a standalone SVG.
pub fn trajectory_svg(motion: &PoseSequence, layout: &crate::data::PoseFeatureLayout) -> String {
    let t = motion.num_frames();
    let mut theta: Real = 0.0;
    let mut x = 0.0;
    let mut z = 0.0;
    let mut path_xz = Vec::with_capacity(t);
    let mut heights = Vec::with_capacity(t);
    for i in 0..t {
        let row = motion.frames.row(i);
        theta += row[crate::data::PoseFeatureLayout::ROOT_ANG];
        let (lat, fwd) = (
            row[crate::data::PoseFeatureLayout::ROOT_LIN],
            row[crate::data::PoseFeatureLayout::ROOT_LIN + 1],
        );
        x += theta.cos() * lat + theta.sin() * fwd;
        z += -theta.sin() * lat + theta.cos() * fwd;
        path_xz.push((x, z));
        heights.push(row[crate::data::PoseFeatureLayout::ROOT_HEIGHT]);
    }
    let _ = layout;
    let scale = 40.0;
    let poly: String = path_xz
        .iter()
        .map(|(x, z)| format!("{:.2},{:.2}", 150.0 + x * scale, 150.0 - z * scale))
        .collect::<Vec<_>>()
        .join(" ");
    let hpoly: String = heights
        .iter()
        .enumerate()
        .map(|(i, h)| format!("{:.2},{:.2}", 20.0 + i as Real * 260.0 / t.max(1) as Real, 380.0 - h * 60.0))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"300\" height=\"420\">\n\
         <rect width=\"300\" height=\"420\" fill=\"white\"/>\n\
         <text x=\"10\" y=\"16\" font-size=\"11\">root trajectory (top-down)</text>\n\
         <polyline points=\"{poly}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n\
         <text x=\"10\" y=\"316\" font-size=\"11\">root height</text>\n\
         <polyline points=\"{hpoly}\" fill=\"none\" stroke=\"darkorange\" stroke-width=\"1.5\"/>\n\
         </svg>\n"
    )
}
