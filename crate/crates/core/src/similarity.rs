//! Text similarity providers.
//!
//! [`HashingEmbedder`] is the offline default: unigram and bigram counts
//! feature-hashed into 512 buckets and L2-normalized. [`RemoteEmbedder`]
//! forwards to an HTTP embedding endpoint through [`crate::llmclient`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::domain::{Candidate, ConversationHistory};
use crate::llmclient::{EmbeddingClient, LlmError};

pub const HASH_DIM: usize = 512;
const HASH_SEED: u64 = 0x5eed_c0de_2024_0001;
const MEMO_LIMIT: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("embedding backend failed: {0}")]
    Backend(#[from] LlmError),
    #[error("embedding dimension {got} does not match provider dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding contains a non-finite component")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Cosine similarity clamped to [-1, 1]; zero if either side is degenerate.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.dim() != b.dim() {
        return 0.0;
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Lowercases and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub trait SimilarityProvider: Send + Sync {
    fn name(&self) -> &str;

    fn embed(&self, text: &str) -> Result<Arc<EmbeddingVector>, SimilarityError>;

    fn cosine(&self, a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
        cosine(a, b)
    }

    /// `sim(c, h)`: cosine between the candidate text and the whole history.
    fn sim(&self, candidate: &Candidate, history: &ConversationHistory) -> Result<f64, SimilarityError> {
        let c = self.embed(&candidate.text)?;
        let h = self.embed(&history.joined_text())?;
        Ok(self.cosine(&c, &h))
    }
}

#[derive(Default)]
struct Memo {
    map: Mutex<HashMap<String, Arc<EmbeddingVector>>>,
}

impl Memo {
    fn get(&self, key: &str) -> Option<Arc<EmbeddingVector>> {
        self.map.lock().unwrap().get(key).cloned()
    }

    fn put(&self, key: String, v: Arc<EmbeddingVector>) {
        let mut map = self.map.lock().unwrap();
        if map.len() >= MEMO_LIMIT {
            map.clear();
        }
        map.insert(key, v);
    }
}

/// Deterministic offline embedder.
#[derive(Default)]
pub struct HashingEmbedder {
    memo: Memo,
}

impl HashingEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bucket a feature string maps to (FNV-1a with a fixed seed).
    pub fn bucket(feature: &str) -> usize {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ HASH_SEED;
        for b in feature.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        (h % HASH_DIM as u64) as usize
    }

    /// Unigram and bigram features of the normalized text. Bigrams do not
    /// span punctuation or line breaks.
    pub fn features(text: &str) -> Vec<String> {
        let mut unigrams = Vec::new();
        let mut bigrams = Vec::new();
        let lines: Vec<String> = text.lines().map(normalize_text).collect();
        for clause in lines
            .iter()
            .flat_map(|l| l.split(|c: char| !(c.is_alphanumeric() || c == ' ')))
        {
            let tokens: Vec<&str> = clause.split(' ').filter(|t| !t.is_empty()).collect();
            unigrams.extend(tokens.iter().map(|t| t.to_string()));
            bigrams.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
        }
        unigrams.extend(bigrams);
        unigrams
    }

    fn compute(text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; HASH_DIM];
        for f in Self::features(text) {
            v[Self::bucket(&f)] += 1.0;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        EmbeddingVector(v)
    }
}

impl SimilarityProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing-512"
    }

    fn embed(&self, text: &str) -> Result<Arc<EmbeddingVector>, SimilarityError> {
        if let Some(v) = self.memo.get(text) {
            return Ok(v);
        }
        let v = Arc::new(Self::compute(text));
        self.memo.put(text.to_string(), Arc::clone(&v));
        Ok(v)
    }
}

/// Embeddings served by an HTTP endpoint.
pub struct RemoteEmbedder {
    client: EmbeddingClient,
    name: String,
    dim: Mutex<Option<usize>>,
    memo: Memo,
}

impl RemoteEmbedder {
    pub fn new(client: EmbeddingClient) -> Self {
        let name = format!("remote:{}", client.model());
        Self {
            client,
            name,
            dim: Mutex::new(None),
            memo: Memo::default(),
        }
    }
}

impl SimilarityProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, text: &str) -> Result<Arc<EmbeddingVector>, SimilarityError> {
        let key = normalize_text(text);
        if key.is_empty() {
            let dim = self.dim.lock().unwrap().unwrap_or(1);
            return Ok(Arc::new(EmbeddingVector::zeros(dim)));
        }
        if let Some(v) = self.memo.get(&key) {
            return Ok(v);
        }
        let mut vecs = self.client.embed(std::slice::from_ref(&key))?;
        let v = vecs.pop().ok_or(SimilarityError::Backend(LlmError::Malformed(
            "empty embedding list".into(),
        )))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SimilarityError::NonFinite);
        }
        let mut dim = self.dim.lock().unwrap();
        match *dim {
            Some(d) if d != v.len() => {
                return Err(SimilarityError::Dimension {
                    expected: d,
                    got: v.len(),
                })
            }
            None => *dim = Some(v.len()),
            _ => {}
        }
        let v = Arc::new(EmbeddingVector(v));
        self.memo.put(key, Arc::clone(&v));
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Candidate;

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let e = HashingEmbedder::new();
        let a = e.embed("red lipstick").unwrap();
        let b = HashingEmbedder::new().embed("red lipstick").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_gives_zero_vector_and_zero_sim() {
        let e = HashingEmbedder::new();
        let z = e.embed("   ").unwrap();
        assert!(z.is_zero());
        let c = Candidate::new("a", "");
        let h = ConversationHistory::from_query("red lipstick");
        assert_eq!(e.sim(&c, &h).unwrap(), 0.0);
    }

    #[test]
    fn normalization_collapses_case_and_whitespace() {
        let e = HashingEmbedder::new();
        assert_eq!(e.embed("Red   Lipstick").unwrap(), e.embed("red lipstick").unwrap());
    }

    #[test]
    fn identical_texts_have_unit_similarity() {
        let e = HashingEmbedder::new();
        let c = Candidate::new("a", "matte red lipstick");
        let h = ConversationHistory::from_query("matte red lipstick");
        assert!((e.sim(&c, &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_collision_free_vocabularies_are_orthogonal() {
        let left = "alpha beta";
        let right = "gamma delta";
        let lb: Vec<usize> = HashingEmbedder::features(left)
            .iter()
            .map(|f| HashingEmbedder::bucket(f))
            .collect();
        let rb: Vec<usize> = HashingEmbedder::features(right)
            .iter()
            .map(|f| HashingEmbedder::bucket(f))
            .collect();
        assert!(lb.iter().all(|b| !rb.contains(b)), "pick other words");
        // oracle: direct dot product over the raw count vectors
        let mut l = vec![0.0; HASH_DIM];
        let mut r = vec![0.0; HASH_DIM];
        lb.iter().for_each(|&b| l[b] += 1.0);
        rb.iter().for_each(|&b| r[b] += 1.0);
        let dot: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
        assert_eq!(dot, 0.0);
        let e = HashingEmbedder::new();
        let s = e
            .sim(&Candidate::new("x", left), &ConversationHistory::from_query(right))
            .unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn similarity_is_symmetric() {
        let e = HashingEmbedder::new();
        let (x, y) = ("soft cotton shirt", "a cotton dress that is soft");
        let a = e
            .sim(&Candidate::new("1", x), &ConversationHistory::from_query(y))
            .unwrap();
        let b = e
            .sim(&Candidate::new("2", y), &ConversationHistory::from_query(x))
            .unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn cosine_handles_mismatched_dimensions() {
        assert_eq!(
            cosine(&EmbeddingVector(vec![1.0]), &EmbeddingVector(vec![1.0, 0.0])),
            0.0
        );
    }
}
