//! Repetition-averaged evaluation of both translation directions over a
//! frozen model lineage.

use rand::Rng as _;
use serde::Serialize;

use super::extractors::FeatureExtractors;
use super::metrics::{
    bleu, diversity, fid, mean_ci95, multimodal_distance, multimodality, r_precision,
    GaussianStats,
};
use crate::data::{Corpus, NormStats, Split};
use crate::diff::Real;
use crate::error::{Error, Result};
use crate::m2t::MotionToText;
use crate::quantizer::MotionQuantizer;
use crate::t2m::TextToMotion;
use crate::util::{derive_seed, rng_from_seed};
use crate::vocab::TextTokenSequence;

pub const RP_DISTRACTORS: usize = 31;

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct MetricValue {
    pub mean: Real,
    pub ci95: Real,
    pub n: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MetricReport {
    pub metrics: Vec<(String, MetricValue)>,
    pub errors: Vec<(String, String)>,
}

impl MetricReport {
    pub fn push(&mut self, name: &str, values: &[Real]) {
        let (mean, ci95) = mean_ci95(values);
        self.metrics.push((name.to_string(), MetricValue { mean, ci95, n: values.len() }));
    }

    pub fn get(&self, name: &str) -> Option<MetricValue> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(format!("{:<28} {:>12} {:>12} {:>4}\n", "metric", "mean", "ci95", "n"));
        for (name, v) in &self.metrics {
            out.push_str(&format!("{:<28} {:>12.6} {:>12.6} {:>4}\n", name, v.mean, v.ci95, v.n));
        }
        for (what, why) in &self.errors {
            out.push_str(&format!("omitted: {what}: {why}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,ci95,n\n");
        for (name, v) in &self.metrics {
            out.push_str(&format!("{},{},{},{}\n", name, v.mean, v.ci95, v.n));
        }
        out
    }
}

pub struct SuiteModels<'a> {
    pub vq: Option<&'a MotionQuantizer>,
    pub m2t: Option<&'a MotionToText>,
    pub t2m: Option<&'a TextToMotion>,
    pub extractors: &'a FeatureExtractors,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    pub repetitions: usize,
    pub diversity_subset: usize,
    /// Descriptions used for the multimodality metric, each generated
    /// 2 * mm_samples times.
    pub mm_descriptions: usize,
    pub mm_samples: usize,
    /// Cap on evaluated test entries.
    pub max_entries: usize,
    pub max_tokens: usize,
    pub beam: usize,
    pub master_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            repetitions: 20,
            diversity_subset: 50,
            mm_descriptions: 8,
            mm_samples: 10,
            max_entries: 150,
            max_tokens: 50,
            beam: crate::m2t::DEFAULT_BEAM,
            master_seed: 0,
        }
    }
}

struct TestEntry<'a> {
    id: &'a str,
    motion_norm: crate::data::PoseSequence,
    texts: Vec<TextTokenSequence>,
    raw_texts: Vec<&'a str>,
}

/// Run generation + captioning + the full metric stack over the test
/// split, `repetitions` times, and report mean with 95% confidence
/// half-width per metric. Missing models skip their direction with a note
/// in `errors`.
pub fn evaluate_suite(
    models: &SuiteModels,
    corpus: &Corpus,
    stats: &NormStats,
    cfg: &SuiteConfig,
) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    let test = corpus.split_entries(Split::Test);
    if test.is_empty() {
        return Err(Error::Data("evaluation needs a non-empty test split".into()));
    }
    let entries: Vec<TestEntry> = test
        .iter()
        .take(cfg.max_entries)
        .map(|e| {
            let motion_norm = stats.normalize(&e.motion)?;
            let texts: Vec<TextTokenSequence> =
                e.texts.iter().map(|t| corpus.vocab.encode(t).0).collect();
            Ok(TestEntry {
                id: e.id.as_str(),
                motion_norm,
                texts,
                raw_texts: e.texts.iter().map(|t| t.as_str()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    if entries.len() < RP_DISTRACTORS + 1 {
        return Err(Error::Data(format!(
            "evaluation needs at least {} test entries for retrieval pools, got {}",
            RP_DISTRACTORS + 1,
            entries.len()
        )));
    }
    let ex = models.extractors;

    // frozen per-entry features shared by both directions
    let real_motion_feats: Vec<Vec<Real>> = entries
        .iter()
        .map(|e| ex.motion_feature(&e.motion_norm))
        .collect::<Result<_>>()?;
    let first_text_feats: Vec<Vec<Real>> = entries
        .iter()
        .map(|e| ex.text_feature(&e.texts[0]))
        .collect::<Result<_>>()?;

    // ── text2motion direction ───────────────────────────────────────
    match (models.vq, models.t2m) {
        (Some(vq), Some(t2m)) => {
            let real_stats = GaussianStats::from_features(&real_motion_feats)?;
            let mut rp1 = vec![];
            let mut rp2 = vec![];
            let mut rp3 = vec![];
            let mut fids = vec![];
            let mut mm_dists = vec![];
            let mut divs = vec![];
            let mut mmods = vec![];
            for rep in 0..cfg.repetitions {
                let mut rng = rng_from_seed(derive_seed(cfg.master_seed, 1000 + rep as u64));
                let mut gen_feats = Vec::with_capacity(entries.len());
                let mut text_feats = Vec::with_capacity(entries.len());
                for e in &entries {
                    let text = &e.texts[rng.random_range(0..e.texts.len())];
                    let tokens = t2m.generate(text, cfg.max_tokens, &mut rng)?;
                    let feat = if tokens.interior_len() == 0 {
                        // degenerate empty generation: feature of a single
                        // zero frame keeps the pipeline total
                        ex.motion_feature(&crate::data::PoseSequence::new(
                            crate::diff::NdArray::zeros(&[1, vq.config.channels]),
                            20.0,
                        ))?
                    } else {
                        let pose = vq.detokenize(&tokens)?;
                        ex.motion_feature(&pose)?
                    };
                    gen_feats.push(feat);
                    text_feats.push(ex.text_feature(text)?);
                }
                let rp = r_precision(&gen_feats, &text_feats, 3, RP_DISTRACTORS, &mut rng)?;
                rp1.push(rp[0]);
                rp2.push(rp[1]);
                rp3.push(rp[2]);
                let gen_stats = GaussianStats::from_features(&gen_feats)?;
                fids.push(fid(&real_stats, &gen_stats)?);
                let pairs: Vec<(Vec<Real>, Vec<Real>)> =
                    gen_feats.iter().cloned().zip(text_feats.iter().cloned()).collect();
                mm_dists.push(multimodal_distance(&pairs));
                divs.push(diversity(&gen_feats, cfg.diversity_subset, &mut rng)?);

                // multimodality: 2*s_m generations for each of C descriptions
                let c = cfg.mm_descriptions.min(entries.len());
                let mut per_text = Vec::with_capacity(c);
                for e in entries.iter().take(c) {
                    let text = &e.texts[0];
                    let mut feats = Vec::with_capacity(2 * cfg.mm_samples);
                    for _ in 0..2 * cfg.mm_samples {
                        let tokens = t2m.generate(text, cfg.max_tokens, &mut rng)?;
                        if tokens.interior_len() == 0 {
                            feats.push(vec![0.0; ex.config.feature_dim]);
                        } else {
                            let pose = vq.detokenize(&tokens)?;
                            feats.push(ex.motion_feature(&pose)?);
                        }
                    }
                    per_text.push(feats);
                }
                mmods.push(multimodality(&per_text, cfg.mm_samples, &mut rng)?);
            }
            report.push("t2m_r_precision_top1", &rp1);
            report.push("t2m_r_precision_top2", &rp2);
            report.push("t2m_r_precision_top3", &rp3);
            report.push("t2m_fid", &fids);
            report.push("t2m_mm_dist", &mm_dists);
            report.push("t2m_diversity", &divs);
            report.push("t2m_multimodality", &mmods);
        }
        _ => {
            report
                .errors
                .push(("text2motion metrics".into(), "needs quantizer and t2m checkpoints".into()));
        }
    }

    // ── motion2text direction ───────────────────────────────────────
    match (models.vq, models.m2t) {
        (Some(vq), Some(m2t)) => {
            // captions are deterministic: compute once
            let mut captions = Vec::with_capacity(entries.len());
            let mut caption_feats = Vec::with_capacity(entries.len());
            for e in &entries {
                let tokens = vq.tokenize(&e.motion_norm)?;
                let (caption, _) = m2t.caption_beam(&tokens, cfg.beam, m2t.config.max_text_len)?;
                caption_feats.push(ex.text_feature(&caption).unwrap_or_else(|_| vec![0.0; ex.config.feature_dim]));
                captions.push(caption);
            }
            let cand_tokens: Vec<Vec<String>> = captions
                .iter()
                .map(|c| m2t.vocab.decode(c).split_whitespace().map(str::to_string).collect())
                .collect();
            let ref_tokens: Vec<Vec<Vec<String>>> = entries
                .iter()
                .map(|e| {
                    e.raw_texts
                        .iter()
                        .map(|t| t.split_whitespace().map(str::to_string).collect())
                        .collect()
                })
                .collect();
            let bleu1 = bleu(&cand_tokens, &ref_tokens, 1)?;
            let bleu4 = bleu(&cand_tokens, &ref_tokens, 4)?;

            let mut rp1 = vec![];
            let mut rp2 = vec![];
            let mut rp3 = vec![];
            let mut mm_dists = vec![];
            for rep in 0..cfg.repetitions {
                let mut rng = rng_from_seed(derive_seed(cfg.master_seed, 2000 + rep as u64));
                let rp = r_precision(&caption_feats, &real_motion_feats, 3, RP_DISTRACTORS, &mut rng)?;
                rp1.push(rp[0]);
                rp2.push(rp[1]);
                rp3.push(rp[2]);
                let pairs: Vec<(Vec<Real>, Vec<Real>)> = caption_feats
                    .iter()
                    .cloned()
                    .zip(real_motion_feats.iter().cloned())
                    .collect();
                mm_dists.push(multimodal_distance(&pairs));
            }
            report.push("m2t_r_precision_top1", &rp1);
            report.push("m2t_r_precision_top2", &rp2);
            report.push("m2t_r_precision_top3", &rp3);
            report.push("m2t_mm_dist", &mm_dists);
            report.push("m2t_bleu1", &vec![bleu1; cfg.repetitions]);
            report.push("m2t_bleu4", &vec![bleu4; cfg.repetitions]);
        }
        _ => {
            report
                .errors
                .push(("motion2text metrics".into(), "needs quantizer and m2t checkpoints".into()));
        }
    }

    // reference quality of the real pairs under the same extractors
    {
        let mut rp1 = vec![];
        for rep in 0..cfg.repetitions {
            let mut rng = rng_from_seed(derive_seed(cfg.master_seed, 3000 + rep as u64));
            let rp = r_precision(&first_text_feats, &real_motion_feats, 1, RP_DISTRACTORS, &mut rng)?;
            rp1.push(rp[0]);
        }
        report.push("real_r_precision_top1", &rp1);
        let _ = entries.iter().map(|e| e.id).count();
    }

    Ok(report)
}
