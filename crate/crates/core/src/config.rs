//! Run configuration: a flat key-value file with preset inheritance
//! (`desk`, `paper-scale`); command-line `--set key=value` pairs override
//! file values. Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::diff::Real;
use crate::error::{Error, Result};
use crate::util::hash_hex;

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn desk_defaults() -> BTreeMap<String, String> {
    let pairs: &[(&str, &str)] = &[
        ("preset", "desk"),
        ("seed", "0"),
        // synthetic corpus
        ("synth.entries", "1000"),
        ("synth.min_primitives", "1"),
        ("synth.max_primitives", "3"),
        ("synth.min_duration", "16"),
        ("synth.max_duration", "28"),
        // augmentation
        ("augment.mirror", "true"),
        ("augment.crop_variants", "2"),
        // quantizer
        ("vq.hidden", "64"),
        ("vq.code_dim", "32"),
        ("vq.codebook_size", "64"),
        ("vq.beta", "1"),
        ("vq.dead_code_steps", "256"),
        ("vq.steps", "1800"),
        ("vq.batch_size", "8"),
        ("vq.lr", "0.001"),
        ("vq.lr_final_frac", "0.05"),
        ("vq.max_frames", "32"),
        // motion2text
        ("m2t.d_model", "128"),
        ("m2t.heads", "4"),
        ("m2t.enc_layers", "2"),
        ("m2t.dec_layers", "2"),
        ("m2t.d_ff", "512"),
        ("m2t.dropout", "0.1"),
        ("m2t.max_text_len", "16"),
        ("m2t.steps", "1200"),
        ("m2t.batch_size", "8"),
        ("m2t.lr", "0.0005"),
        // text2motion
        ("t2m.backbone", "gru"),
        ("t2m.word_emb", "64"),
        ("t2m.enc_hidden", "64"),
        ("t2m.dec_hidden", "256"),
        ("t2m.d_att", "128"),
        ("t2m.token_emb", "64"),
        ("t2m.max_tokens", "50"),
        ("t2m.steps", "1000"),
        ("t2m.batch_size", "4"),
        ("t2m.lr", "0.0005"),
        ("t2m.teacher_forcing", "0.4"),
        ("t2m.inverse_weight", "1"),
        ("t2m.tau_start", "1"),
        ("t2m.tau_end", "0.1"),
        ("t2m.rollout_cap", "20"),
        // extractors
        ("ex.word_emb", "64"),
        ("ex.hidden", "128"),
        ("ex.feature_dim", "64"),
        ("ex.margin", "10"),
        ("ex.steps", "800"),
        ("ex.batch_size", "8"),
        ("ex.lr", "0.0005"),
        ("ex.max_frames", "48"),
        // evaluation
        ("eval.repetitions", "20"),
        ("eval.diversity_subset", "50"),
        ("eval.mm_descriptions", "8"),
        ("eval.mm_samples", "10"),
        ("eval.max_entries", "150"),
        ("eval.beam", "2"),
        // training presets shared
        ("grad_clip", "1"),
        ("log_every", "100"),
    ];
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn paper_scale_overrides() -> Vec<(&'static str, &'static str)> {
    vec![
        ("preset", "paper-scale"),
        ("vq.hidden", "1024"),
        ("vq.code_dim", "1024"),
        ("vq.codebook_size", "1024"),
        ("vq.lr", "0.0002"),
        ("m2t.d_model", "512"),
        ("m2t.heads", "8"),
        ("m2t.enc_layers", "4"),
        ("m2t.dec_layers", "4"),
        ("m2t.d_ff", "2048"),
        ("m2t.lr", "0.0002"),
        ("t2m.word_emb", "300"),
        ("t2m.enc_hidden", "512"),
        ("t2m.dec_hidden", "1024"),
        ("t2m.d_att", "1024"),
        ("t2m.token_emb", "1024"),
        ("t2m.lr", "0.0002"),
        ("ex.word_emb", "300"),
        ("ex.hidden", "1024"),
        ("ex.feature_dim", "512"),
        ("ex.lr", "0.0002"),
        ("eval.diversity_subset", "300"),
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { values: desk_defaults() }
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        Self::default()
    }

    pub fn paper_scale() -> Self {
        let mut cfg = Self::default();
        for (k, v) in paper_scale_overrides() {
            cfg.values.insert(k.to_string(), v.to_string());
        }
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper-scale" => Ok(Self::paper_scale()),
            other => Err(Error::Usage(format!(
                "unknown preset {other:?}; expected desk or paper-scale"
            ))),
        }
    }

    /// Parse `key = value` lines; `#` starts a comment. A `preset` line
    /// switches the default set before the remaining keys apply.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!(
                    "{}:{}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = match pairs.iter().find(|(k, _)| k == "preset") {
            Some((_, preset)) => Self::preset(preset)?,
            None => Self::desk(),
        };
        for (k, v) in pairs {
            cfg.set_checked(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn set_checked(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.values.contains_key(key) {
            return Err(Error::Usage(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply `key=value` strings from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects key=value, got {o:?}")))?;
            if k.trim() == "preset" {
                *self = Self::preset(v.trim())?;
            } else {
                self.set_checked(k.trim(), v.trim())?;
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Usage(format!("missing config key {key:?}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.raw(key)?
            .parse()
            .map_err(|e| Error::Usage(format!("config {key} = {:?}: {e}", self.raw(key).unwrap())))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.raw(key)?
            .parse()
            .map_err(|e| Error::Usage(format!("config {key} = {:?}: {e}", self.raw(key).unwrap())))
    }

    pub fn get_real(&self, key: &str) -> Result<Real> {
        self.raw(key)?
            .parse()
            .map_err(|e| Error::Usage(format!("config {key} = {:?}: {e}", self.raw(key).unwrap())))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.raw(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Usage(format!("config {key} = {other:?}: expected a boolean"))),
        }
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.raw(key)
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_u64("seed")
    }

    /// Sorted `key = value` lines: the canonical identity of a run.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        hash_hex(self.canonical_string().as_bytes())
    }

    // ── typed config builders ───────────────────────────────────────

    pub fn quantizer_config(&self, channels: usize) -> Result<crate::quantizer::QuantizerConfig> {
        Ok(crate::quantizer::QuantizerConfig {
            channels,
            hidden: self.get_usize("vq.hidden")?,
            code_dim: self.get_usize("vq.code_dim")?,
            codebook_size: self.get_usize("vq.codebook_size")?,
            beta: self.get_real("vq.beta")?,
            dead_code_steps: self.get_usize("vq.dead_code_steps")?,
        })
    }

    pub fn quantizer_train_config(&self) -> Result<crate::quantizer::QuantizerTrainConfig> {
        Ok(crate::quantizer::QuantizerTrainConfig {
            steps: self.get_usize("vq.steps")?,
            batch_size: self.get_usize("vq.batch_size")?,
            lr: self.get_real("vq.lr")?,
            lr_final_frac: self.get_real("vq.lr_final_frac")?,
            seed: self.seed()?,
            max_frames: self.get_usize("vq.max_frames")?,
            grad_clip: self.get_real("grad_clip")?,
            log_every: self.get_usize("log_every")?,
        })
    }

    pub fn m2t_config(&self, codebook_size: usize, vocab_size: usize) -> Result<crate::m2t::M2tConfig> {
        Ok(crate::m2t::M2tConfig {
            codebook_size,
            transformer: crate::transformer::TransformerConfig {
                src_vocab: crate::tokens::MotionTokenSequence::id_space(codebook_size),
                tgt_vocab: vocab_size,
                d_model: self.get_usize("m2t.d_model")?,
                heads: self.get_usize("m2t.heads")?,
                enc_layers: self.get_usize("m2t.enc_layers")?,
                dec_layers: self.get_usize("m2t.dec_layers")?,
                d_ff: self.get_usize("m2t.d_ff")?,
                dropout: self.get_real("m2t.dropout")?,
                max_len: 256,
            },
            max_text_len: self.get_usize("m2t.max_text_len")?,
        })
    }

    pub fn m2t_train_config(&self) -> Result<crate::m2t::M2tTrainConfig> {
        Ok(crate::m2t::M2tTrainConfig {
            steps: self.get_usize("m2t.steps")?,
            batch_size: self.get_usize("m2t.batch_size")?,
            lr: self.get_real("m2t.lr")?,
            seed: self.seed()?,
            grad_clip: self.get_real("grad_clip")?,
            log_every: self.get_usize("log_every")?,
        })
    }

    pub fn t2m_config(&self, vocab_size: usize, codebook_size: usize) -> Result<crate::t2m::T2mConfig> {
        Ok(crate::t2m::T2mConfig {
            vocab_size,
            codebook_size,
            word_emb: self.get_usize("t2m.word_emb")?,
            enc_hidden: self.get_usize("t2m.enc_hidden")?,
            dec_hidden: self.get_usize("t2m.dec_hidden")?,
            d_att: self.get_usize("t2m.d_att")?,
            token_emb: self.get_usize("t2m.token_emb")?,
            max_tokens: self.get_usize("t2m.max_tokens")?,
        })
    }

    pub fn t2m_train_config(&self, inverse: bool) -> Result<crate::t2m::T2mTrainConfig> {
        Ok(crate::t2m::T2mTrainConfig {
            steps: self.get_usize("t2m.steps")?,
            batch_size: self.get_usize("t2m.batch_size")?,
            lr: self.get_real("t2m.lr")?,
            seed: self.seed()?,
            teacher_forcing: self.get_real("t2m.teacher_forcing")?,
            inverse_weight: if inverse { self.get_real("t2m.inverse_weight")? } else { 0.0 },
            tau_start: self.get_real("t2m.tau_start")?,
            tau_end: self.get_real("t2m.tau_end")?,
            rollout_cap: self.get_usize("t2m.rollout_cap")?,
            grad_clip: self.get_real("grad_clip")?,
            log_every: self.get_usize("log_every")?,
        })
    }

    pub fn extractor_config(&self, pose_channels: usize, vocab_size: usize) -> Result<crate::eval::ExtractorConfig> {
        Ok(crate::eval::ExtractorConfig {
            pose_channels,
            vocab_size,
            word_emb: self.get_usize("ex.word_emb")?,
            hidden: self.get_usize("ex.hidden")?,
            feature_dim: self.get_usize("ex.feature_dim")?,
            margin: self.get_real("ex.margin")?,
        })
    }

    pub fn extractor_train_config(&self) -> Result<crate::eval::ExtractorTrainConfig> {
        Ok(crate::eval::ExtractorTrainConfig {
            steps: self.get_usize("ex.steps")?,
            batch_size: self.get_usize("ex.batch_size")?,
            lr: self.get_real("ex.lr")?,
            seed: self.seed()?,
            grad_clip: self.get_real("grad_clip")?,
            log_every: self.get_usize("log_every")?,
            max_frames: self.get_usize("ex.max_frames")?,
        })
    }

    pub fn synth_spec(&self) -> Result<crate::data::SynthSpec> {
        Ok(crate::data::SynthSpec {
            entries: self.get_usize("synth.entries")?,
            min_primitives: self.get_usize("synth.min_primitives")?,
            max_primitives: self.get_usize("synth.max_primitives")?,
            min_duration: self.get_usize("synth.min_duration")?,
            max_duration: self.get_usize("synth.max_duration")?,
            primitives: crate::data::synth::ALL_PRIMITIVES.to_vec(),
        })
    }

    pub fn suite_config(&self) -> Result<crate::eval::SuiteConfig> {
        Ok(crate::eval::SuiteConfig {
            repetitions: self.get_usize("eval.repetitions")?,
            diversity_subset: self.get_usize("eval.diversity_subset")?,
            mm_descriptions: self.get_usize("eval.mm_descriptions")?,
            mm_samples: self.get_usize("eval.mm_samples")?,
            max_entries: self.get_usize("eval.max_entries")?,
            max_tokens: self.get_usize("t2m.max_tokens")?,
            beam: self.get_usize("eval.beam")?,
            master_seed: self.seed()?,
        })
    }
}
