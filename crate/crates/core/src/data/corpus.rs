//! Motion-language corpus: entries, splits and line-delimited storage.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::PoseFeatureLayout;
use crate::diff::{NdArray, Real};
use crate::error::{Error, Result};
use crate::util::hash_hex;
use crate::vocab::Vocabulary;

/// Continuous motion: one pose feature vector per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: NdArray, // [T, D_p]
    pub fps: Real,
}

impl PoseSequence {
    pub fn new(frames: NdArray, fps: Real) -> Self {
        assert_eq!(frames.ndim(), 2, "PoseSequence frames must be [T, D]");
        PoseSequence { frames, fps }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.frames.shape()[1]
    }

    /// Drop trailing frames so the length is a multiple of 4.
    pub fn trim_to_multiple_of_4(&self) -> PoseSequence {
        let t = self.num_frames();
        let keep = t - (t % 4);
        self.slice_frames(0, keep)
    }

    pub fn slice_frames(&self, start: usize, len: usize) -> PoseSequence {
        let d = self.channels();
        let data = self.frames.data()[start * d..(start + len) * d].to_vec();
        PoseSequence { frames: NdArray::matrix(len, d, data), fps: self.fps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Val,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
            Split::Val => write!(f, "val"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub motion: PoseSequence,
    pub texts: Vec<String>,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub layout: PoseFeatureLayout,
    pub entries: Vec<CorpusEntry>,
    pub vocab: Vocabulary,
}

impl Corpus {
    /// Assemble from entries; the vocabulary is rebuilt from train-split
    /// texts so it is a pure function of the corpus.
    pub fn from_entries(layout: PoseFeatureLayout, entries: Vec<CorpusEntry>) -> Self {
        let vocab = Vocabulary::from_texts(
            entries
                .iter()
                .filter(|e| e.split == Split::Train)
                .flat_map(|e| e.texts.iter().map(|s| s.as_str())),
        );
        Corpus { layout, entries, vocab }
    }

    pub fn split_entries(&self, split: Split) -> Vec<&CorpusEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn split_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for e in &self.entries {
            match e.split {
                Split::Train => c.0 += 1,
                Split::Test => c.1 += 1,
                Split::Val => c.2 += 1,
            }
        }
        c
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entries {
            let rec = Record {
                id: e.id.clone(),
                t: e.motion.num_frames(),
                d: e.motion.channels(),
                fps: e.motion.fps as f64,
                frames: e.motion.frames.data().iter().map(|&x| x as f64).collect(),
                texts: e.texts.clone(),
                split: e.split,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        let mut layout: Option<PoseFeatureLayout> = None;
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| {
                Error::Data(format!("{}:{}: malformed record: {e}", path.display(), lineno + 1))
            })?;
            let this_layout = PoseFeatureLayout::from_channels(rec.d).ok_or_else(|| {
                Error::Data(format!(
                    "{}:{}: {} channels is not a valid pose layout width",
                    path.display(),
                    lineno + 1,
                    rec.d
                ))
            })?;
            match layout {
                None => layout = Some(this_layout),
                Some(l) if l != this_layout => {
                    return Err(Error::Data(format!(
                        "{}:{}: channel width {} does not match expected {}",
                        path.display(),
                        lineno + 1,
                        rec.d,
                        l.channels()
                    )));
                }
                _ => {}
            }
            if rec.frames.len() != rec.t * rec.d {
                return Err(Error::Data(format!(
                    "{}:{}: frames array has {} values, expected {}x{}",
                    path.display(),
                    lineno + 1,
                    rec.frames.len(),
                    rec.t,
                    rec.d
                )));
            }
            if rec.frames.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "{}:{}: non-finite frame value",
                    path.display(),
                    lineno + 1
                )));
            }
            let frames =
                NdArray::matrix(rec.t, rec.d, rec.frames.iter().map(|&x| x as Real).collect());
            entries.push(CorpusEntry {
                id: rec.id,
                motion: PoseSequence::new(frames, rec.fps as Real),
                texts: rec.texts,
                split: rec.split,
            });
        }
        let layout = layout.ok_or_else(|| Error::Data(format!("{}: empty corpus", path.display())))?;
        Ok(Corpus::from_entries(layout, entries))
    }

    /// Identity hash over the serialized byte stream.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for e in &self.entries {
            bytes.extend_from_slice(e.id.as_bytes());
            for &v in e.motion.frames.data() {
                bytes.extend_from_slice(&(v as f64).to_le_bytes());
            }
            for t in &e.texts {
                bytes.extend_from_slice(t.as_bytes());
            }
            bytes.push(match e.split {
                Split::Train => 0,
                Split::Test => 1,
                Split::Val => 2,
            });
        }
        hash_hex(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    t: usize,
    d: usize,
    fps: f64,
    frames: Vec<f64>,
    texts: Vec<String>,
    split: Split,
}
