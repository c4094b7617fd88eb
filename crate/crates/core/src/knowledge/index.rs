use serde::Serialize;

use super::{EmbeddingVector, KnowledgeError};
use crate::scalar::Real;

/// `aᵀb / (‖a‖‖b‖)`, clamped to [−1, 1]. Zero-norm input yields 0.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> Result<T, KnowledgeError> {
    if a.len() != b.len() {
        return Err(KnowledgeError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dot: T = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let na: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return Ok(T::zero());
    }
    Ok((dot / (na * nb)).max(-T::one()).min(T::one()))
}

pub fn cosine_sim(q: &EmbeddingVector, k: &EmbeddingVector) -> Result<f64, KnowledgeError> {
    cosine(q.as_slice(), k.as_slice())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    /// Query text, when the query came from text.
    pub query: String,
    pub hits: Vec<Hit>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.id.as_str()).collect()
    }
}

/// Exact exhaustive-scan index.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }

    pub fn insert(&mut self, id: impl Into<String>, v: EmbeddingVector) -> Result<(), KnowledgeError> {
        let id = id.into();
        if v.dim() != self.dim {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        if self.contains(&id) {
            return Err(KnowledgeError::DuplicateId(id));
        }
        self.ids.push(id);
        self.vectors.push(v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.ids.iter().position(|i| i == id).map(|p| &self.vectors[p])
    }

    /// The `k` most similar entries, score descending, ties by ascending id.
    pub fn top_k(&self, q: &EmbeddingVector, k: usize) -> Result<RetrievalResult, KnowledgeError> {
        if self.is_empty() {
            return Err(KnowledgeError::EmptyIndex);
        }
        if k == 0 {
            return Err(KnowledgeError::ZeroK);
        }
        let mut hits = self
            .ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| {
                Ok(Hit {
                    id: id.clone(),
                    score: cosine_sim(q, v)?,
                })
            })
            .collect::<Result<Vec<_>, KnowledgeError>>()?;
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k);
        Ok(RetrievalResult { query: String::new(), hits })
    }
}
