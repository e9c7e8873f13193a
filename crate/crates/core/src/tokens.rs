//! Discrete motion token sequences: codebook indices framed by boundary
//! markers. For a codebook of size K the special ids are BOM = K,
//! EOM = K+1 and PAD = K+2, so the token-id space has size K+3.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionTokenSequence {
    ids: Vec<usize>,
    codebook_size: usize,
}

impl MotionTokenSequence {
    pub fn bom(k: usize) -> usize {
        k
    }
    pub fn eom(k: usize) -> usize {
        k + 1
    }
    pub fn pad(k: usize) -> usize {
        k + 2
    }
    pub fn id_space(k: usize) -> usize {
        k + 3
    }

    /// Wrap interior codebook indices with BOM/EOM.
    pub fn from_interior(interior: Vec<usize>, codebook_size: usize) -> Result<Self> {
        for &id in &interior {
            if id >= codebook_size {
                return Err(Error::Data(format!(
                    "token id {id} out of codebook range {codebook_size}"
                )));
            }
        }
        let mut ids = Vec::with_capacity(interior.len() + 2);
        ids.push(Self::bom(codebook_size));
        ids.extend(interior);
        ids.push(Self::eom(codebook_size));
        Ok(MotionTokenSequence { ids, codebook_size })
    }

    /// Validate an already-framed id list.
    pub fn from_framed(ids: Vec<usize>, codebook_size: usize) -> Result<Self> {
        if ids.len() < 2 {
            return Err(Error::Data(format!("motion token sequence too short: {}", ids.len())));
        }
        if ids[0] != Self::bom(codebook_size) {
            return Err(Error::Data(format!(
                "motion token sequence must start with BOM ({})",
                Self::bom(codebook_size)
            )));
        }
        if *ids.last().unwrap() != Self::eom(codebook_size) {
            return Err(Error::Data(format!(
                "motion token sequence must end with EOM ({})",
                Self::eom(codebook_size)
            )));
        }
        for &id in &ids[1..ids.len() - 1] {
            if id >= codebook_size {
                return Err(Error::Data(format!(
                    "interior token {id} is special or out of range (K={codebook_size})"
                )));
            }
        }
        Ok(MotionTokenSequence { ids, codebook_size })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn interior(&self) -> &[usize] {
        &self.ids[1..self.ids.len() - 1]
    }

    pub fn interior_len(&self) -> usize {
        self.ids.len() - 2
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }
}
