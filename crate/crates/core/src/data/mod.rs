//! Pose featurization, normalization, augmentation and the synthetic
//! motion-language corpus.

pub mod augment;
pub mod corpus;
pub mod layout;
pub mod synth;

pub use augment::{crop, mirror_entry, mirror_motion, mirror_text, random_crop, NormStats};
pub use corpus::{Corpus, CorpusEntry, PoseSequence, Split};
pub use layout::{MirrorSpec, PoseFeatureLayout};
pub use synth::{synth_corpus, SynthSpec};
