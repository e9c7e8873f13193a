//! Word vocabulary and framed text token sequences.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIALS: usize = 4;

/// Bijective word <-> id map over non-specials; BOS/EOS/PAD/UNK hold the
/// reserved low ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>, // ids NUM_SPECIALS..
}

impl Vocabulary {
    /// Build from whitespace-tokenized texts; word ids are assigned in
    /// sorted order so the same text set always yields the same map.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeSet::new();
        for t in texts {
            for w in t.split_whitespace() {
                set.insert(w.to_string());
            }
        }
        Vocabulary { words: set.into_iter().collect() }
    }

    pub fn from_words(words: Vec<String>) -> Self {
        Vocabulary { words }
    }

    pub fn size(&self) -> usize {
        NUM_SPECIALS + self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_id(&self, w: &str) -> Option<usize> {
        self.words.binary_search_by(|probe| probe.as_str().cmp(w)).ok().map(|i| i + NUM_SPECIALS)
    }

    pub fn id_word(&self, id: usize) -> Option<&str> {
        match id {
            BOS => Some("<bos>"),
            EOS => Some("<eos>"),
            PAD => Some("<pad>"),
            UNK => Some("<unk>"),
            _ => self.words.get(id - NUM_SPECIALS).map(|s| s.as_str()),
        }
    }

    /// Tokenize and frame a sentence; unknown words map to UNK and are
    /// reported back.
    pub fn encode(&self, text: &str) -> (TextTokenSequence, Vec<String>) {
        let mut ids = vec![BOS];
        let mut unknown = Vec::new();
        for w in text.split_whitespace() {
            match self.word_id(w) {
                Some(id) => ids.push(id),
                None => {
                    ids.push(UNK);
                    unknown.push(w.to_string());
                }
            }
        }
        ids.push(EOS);
        (TextTokenSequence::new(ids).expect("encode produces well-framed sequences"), unknown)
    }

    pub fn decode(&self, seq: &TextTokenSequence) -> String {
        seq.interior()
            .iter()
            .map(|&id| self.id_word(id).unwrap_or("<bad>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line; the line number gives the id after specials.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for w in &self.words {
            writeln!(f, "{w}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut words = Vec::new();
        for line in std::io::BufReader::new(f).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                words.push(line.trim().to_string());
            }
        }
        Ok(Vocabulary { words })
    }
}

/// Word ids framed by BOS/EOS. Interior may contain UNK but no other
/// special.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TextTokenSequence {
    ids: Vec<usize>,
}

impl TextTokenSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if ids.len() < 2 {
            return Err(Error::Data(format!("text sequence too short: {} ids", ids.len())));
        }
        if ids[0] != BOS || *ids.last().unwrap() != EOS {
            return Err(Error::Data("text sequence must be framed by BOS/EOS".into()));
        }
        for &id in &ids[1..ids.len() - 1] {
            if id == BOS || id == EOS || id == PAD {
                return Err(Error::Data(format!("interior special id {id} in text sequence")));
            }
        }
        Ok(TextTokenSequence { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn interior(&self) -> &[usize] {
        &self.ids[1..self.ids.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false // frame is always present
    }

    /// Swap a pair of word ids everywhere in the interior (mirror
    /// augmentation's left<->right exchange).
    pub fn swap_words(&mut self, a: usize, b: usize) {
        for id in &mut self.ids[..] {
            if *id == a {
                *id = b;
            } else if *id == b {
                *id = a;
            }
        }
    }
}
