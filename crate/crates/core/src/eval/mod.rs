//! Evaluation stack: contrastive feature extractors and the metric suite
//! (R-precision, multimodal distance, FID, diversity, multimodality,
//! BLEU) with repetition means and confidence intervals.

pub mod extractors;
pub mod metrics;
pub mod suite;


pub use extractors::{train_extractors, ExtractorConfig, ExtractorTrainConfig, FeatureExtractors};
pub use metrics::{
    bleu, contrastive_loss, diversity, euclidean, fid, mean_ci95, multimodal_distance,
    multimodality, r_precision, GaussianStats,
};
pub use suite::{evaluate_suite, MetricReport, MetricValue, SuiteConfig, SuiteModels};
