//! Normalization, mirroring and crop augmentation.

use rand::Rng as _;

use super::corpus::{Corpus, CorpusEntry, PoseSequence, Split};
use super::layout::{MirrorSpec, PoseFeatureLayout};
use crate::diff::{NdArray, Real};
use crate::error::{Error, Result};
use crate::util::Rng;

/// Per-channel Z-score statistics from the train split, plus the mask of
/// channels amplified by 5 after scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<Real>,
    pub std: Vec<Real>,
    pub scale_mask: Vec<bool>,
    /// Channels whose variance vanished (std forced to 1).
    pub degenerate: Vec<usize>,
}

pub const CHANNEL_SCALE: Real = 5.0;

impl NormStats {
    /// Statistics over train-split frames only; the split tags of every
    /// consumed entry are asserted.
    pub fn from_train_split(corpus: &Corpus) -> NormStats {
        let train: Vec<&CorpusEntry> = corpus.split_entries(Split::Train);
        assert!(!train.is_empty(), "normalization needs a non-empty train split");
        for e in &train {
            assert_eq!(e.split, Split::Train, "stats computation touched a non-train entry");
        }
        let d = corpus.layout.channels();
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for e in &train {
            let f = &e.motion.frames;
            for t in 0..f.shape()[0] {
                for (m, &v) in mean.iter_mut().zip(f.row(t)) {
                    *m += v;
                }
            }
            count += f.shape()[0];
        }
        for m in &mut mean {
            *m /= count as Real;
        }
        let mut var = vec![0.0; d];
        for e in &train {
            let f = &e.motion.frames;
            for t in 0..f.shape()[0] {
                for (v, (&x, &m)) in var.iter_mut().zip(f.row(t).iter().zip(&mean)) {
                    *v += (x - m) * (x - m);
                }
            }
        }
        let mut degenerate = Vec::new();
        let std: Vec<Real> = var
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let s = (v / count as Real).sqrt();
                if s < 1e-8 {
                    degenerate.push(i);
                    1.0
                } else {
                    s
                }
            })
            .collect();
        NormStats { mean, std, scale_mask: corpus.layout.scale_mask(), degenerate }
    }

    /// Z-score each channel, then amplify the masked (root/contact)
    /// channels by 5.
    pub fn normalize(&self, motion: &PoseSequence) -> Result<PoseSequence> {
        let d = motion.channels();
        if d != self.mean.len() {
            return Err(Error::Data(format!(
                "normalize: motion has {d} channels, stats have {}",
                self.mean.len()
            )));
        }
        let t = motion.num_frames();
        let mut data = Vec::with_capacity(t * d);
        for r in 0..t {
            for (j, &x) in motion.frames.row(r).iter().enumerate() {
                let z = (x - self.mean[j]) / self.std[j];
                data.push(if self.scale_mask[j] { z * CHANNEL_SCALE } else { z });
            }
        }
        Ok(PoseSequence::new(NdArray::matrix(t, d, data), motion.fps))
    }

    pub fn denormalize(&self, motion: &PoseSequence) -> Result<PoseSequence> {
        let d = motion.channels();
        if d != self.mean.len() {
            return Err(Error::Data(format!(
                "denormalize: motion has {d} channels, stats have {}",
                self.mean.len()
            )));
        }
        let t = motion.num_frames();
        let mut data = Vec::with_capacity(t * d);
        for r in 0..t {
            for (j, &z) in motion.frames.row(r).iter().enumerate() {
                let z = if self.scale_mask[j] { z / CHANNEL_SCALE } else { z };
                data.push(z * self.std[j] + self.mean[j]);
            }
        }
        Ok(PoseSequence::new(NdArray::matrix(t, d, data), motion.fps))
    }
}

/// Signs applied to the 6 rotation channels of one joint under mirroring:
/// for R -> M R M with M = diag(-1, 1, 1), entry (i, j) flips iff exactly
/// one of i, j is the lateral axis.
const ROT6D_MIRROR_SIGN: [Real; 6] = [1.0, -1.0, -1.0, -1.0, 1.0, 1.0];

/// Mirror a raw pose sequence: lateral components negate, left/right
/// joints exchange, contact pairs swap. Exact involution (sign flips and
/// permutations only).
pub fn mirror_motion(
    motion: &PoseSequence,
    layout: &PoseFeatureLayout,
    spec: &MirrorSpec,
) -> PoseSequence {
    assert_eq!(spec.joint_swap.len(), layout.joints);
    let t = motion.num_frames();
    let d = motion.channels();
    assert_eq!(d, layout.channels());
    let mut out = vec![0.0; t * d];
    let pos0 = layout.positions_start();
    let vel0 = layout.velocities_start();
    let rot0 = layout.rotations_start();
    let con0 = layout.contacts_start();
    for r in 0..t {
        let src = motion.frames.row(r);
        let dst = &mut out[r * d..(r + 1) * d];
        dst[PoseFeatureLayout::ROOT_ANG] = -src[PoseFeatureLayout::ROOT_ANG];
        dst[PoseFeatureLayout::ROOT_LIN] = -src[PoseFeatureLayout::ROOT_LIN]; // lateral
        dst[PoseFeatureLayout::ROOT_LIN + 1] = src[PoseFeatureLayout::ROOT_LIN + 1]; // forward
        dst[PoseFeatureLayout::ROOT_HEIGHT] = src[PoseFeatureLayout::ROOT_HEIGHT];
        // local positions: non-root joints, swapped, lateral negated
        for j in 1..layout.joints {
            let s = spec.joint_swap[j];
            debug_assert!(s >= 1, "root cannot swap with a limb joint");
            let a = pos0 + 3 * (j - 1);
            let b = pos0 + 3 * (s - 1);
            dst[a] = -src[b];
            dst[a + 1] = src[b + 1];
            dst[a + 2] = src[b + 2];
        }
        // velocities: all joints
        for j in 0..layout.joints {
            let s = spec.joint_swap[j];
            let a = vel0 + 3 * j;
            let b = vel0 + 3 * s;
            dst[a] = -src[b];
            dst[a + 1] = src[b + 1];
            dst[a + 2] = src[b + 2];
        }
        // 6D rotations: non-root joints
        for j in 1..layout.joints {
            let s = spec.joint_swap[j];
            let a = rot0 + 6 * (j - 1);
            let b = rot0 + 6 * (s - 1);
            for k in 0..6 {
                dst[a + k] = ROT6D_MIRROR_SIGN[k] * src[b + k];
            }
        }
        // contacts: [left pair, right pair] exchange
        dst[con0] = src[con0 + 2];
        dst[con0 + 1] = src[con0 + 3];
        dst[con0 + 2] = src[con0];
        dst[con0 + 3] = src[con0 + 1];
    }
    PoseSequence::new(NdArray::matrix(t, d, out), motion.fps)
}

/// Swap the words "left" and "right" in a raw description.
pub fn mirror_text(text: &str) -> String {
    text.split_whitespace()
        .map(|w| match w {
            "left" => "right",
            "right" => "left",
            other => other,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Mirror a whole entry: motion channels and every description.
pub fn mirror_entry(
    entry: &CorpusEntry,
    layout: &PoseFeatureLayout,
    spec: &MirrorSpec,
) -> CorpusEntry {
    CorpusEntry {
        id: entry.id.clone(),
        motion: mirror_motion(&entry.motion, layout, spec),
        texts: entry.texts.iter().map(|t| mirror_text(t)).collect(),
        split: entry.split,
    }
}

/// Remove 0-4 frames from the head and 0-4 from the tail uniformly at
/// random, then trim the remainder to a multiple of 4.
pub fn random_crop(motion: &PoseSequence, rng: &mut Rng) -> Result<PoseSequence> {
    let t = motion.num_frames();
    if t <= 8 {
        return Err(Error::Data(format!("random_crop needs more than 8 frames, got {t}")));
    }
    let head = rng.random_range(0..=4usize);
    let tail = rng.random_range(0..=4usize);
    crop(motion, head, tail)
}

/// Deterministic variant used by tests and by `random_crop`.
pub fn crop(motion: &PoseSequence, head: usize, tail: usize) -> Result<PoseSequence> {
    let t = motion.num_frames();
    if head + tail >= t {
        return Err(Error::Data(format!("crop ({head},{tail}) exhausts {t} frames")));
    }
    let remaining = t - head - tail;
    let keep = remaining - (remaining % 4);
    if keep < 4 {
        return Err(Error::Data(format!(
            "crop ({head},{tail}) of {t} frames leaves {remaining} < 4 usable"
        )));
    }
    Ok(motion.slice_frames(head, keep))
}
