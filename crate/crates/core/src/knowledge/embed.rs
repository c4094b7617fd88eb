use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::KnowledgeError;

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_0f6b;

/// Unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes `raw`. The zero vector and non-finite input are rejected.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, KnowledgeError> {
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(KnowledgeError::NonFinite);
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(KnowledgeError::ZeroVector);
        }
        Ok(Self(raw.into_iter().map(|x| x / norm).collect()))
    }

    /// Accepts an already-normalized vector as is, so persisted vectors
    /// survive a round trip bit for bit.
    pub fn from_unit(v: Vec<f64>) -> Result<Self, KnowledgeError> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(KnowledgeError::NonFinite);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(KnowledgeError::NotUnit(norm));
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Self::from_unit(v).map_err(serde::de::Error::custom)
    }
}

/// Text → vector encoder. A learned sentence encoder can implement this in
/// place of [`HashedEmbedder`].
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, KnowledgeError>;
}

/// Lowercases and replaces everything but letters, digits and `_` with
/// whitespace, then splits into tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Hashed bag of words: each normalized token lands in one of `dim` buckets
/// via seeded FNV-1a and adds its count there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, KnowledgeError> {
        if dim == 0 {
            return Err(KnowledgeError::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(Self { dim, seed })
    }

    pub fn bucket(&self, token: &str) -> usize {
        let mut h = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ self.seed);
        h.write(token.as_bytes());
        (h.finish() % self.dim as u64) as usize
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, KnowledgeError> {
        let tokens = normalize_tokens(text);
        if tokens.is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        let mut raw = vec![0.0; self.dim];
        for t in &tokens {
            raw[self.bucket(t)] += 1.0;
        }
        EmbeddingVector::from_raw(raw)
    }
}
