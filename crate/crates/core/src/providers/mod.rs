//! Interfaces to the pretrained-model capabilities the pipeline needs.
//!
//! Each capability has a deterministic fixture implementation backed by files
//! ([`fixture`]) and a client for the line-delimited JSON protocol spoken by an
//! external adapter process ([`remote`]).

mod embeddings;
pub mod fixture;
pub mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embeddings::{cosine, mean_vector, WordEmbeddingTable};

use crate::model::TokenKind;

pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("connection closed")]
    Closed,
    #[error("timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("remote error: {0}")]
    Remote(String),
    #[error("no embedding for image {0:?}")]
    MissingImage(String),
    #[error("{0}")]
    Other(String),
}

/// A token sequence with exactly one mask, plus the number of candidates wanted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFillQuery {
    pub tokens: Vec<String>,
    pub mask_index: usize,
    pub k: usize,
    /// The rendered text with `[MASK]` in place.
    pub text: String,
}

impl MaskFillQuery {
    /// Builds the query for a mask placed before `index` in `stream`.
    pub fn at(stream: &crate::model::TokenStream, index: usize, k: usize) -> Self {
        let masked = stream.with_inserted(index, MASK_TOKEN, TokenKind::Word);
        MaskFillQuery {
            tokens: masked.surfaces(),
            mask_index: index,
            k,
            text: masked.render(),
        }
    }

    /// Lowercased token right after the mask, if any.
    pub fn next_word(&self) -> Option<String> {
        self.tokens.get(self.mask_index + 1).map(|t| t.to_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFillCandidate {
    pub word: String,
    pub probability: f64,
}

impl MaskFillCandidate {
    pub fn new(word: impl Into<String>, probability: f64) -> Self {
        MaskFillCandidate {
            word: word.into(),
            probability,
        }
    }
}

/// Checks the mask-fill contract: at most `k` entries, positive finite
/// probabilities, non-increasing order.
pub fn check_candidates(candidates: &[MaskFillCandidate], k: usize) -> Result<(), ProviderError> {
    if candidates.len() > k {
        return Err(ProviderError::Malformed(format!(
            "{} candidates for k={k}",
            candidates.len()
        )));
    }
    for c in candidates {
        if !(c.probability.is_finite() && c.probability > 0.0) {
            return Err(ProviderError::Malformed(format!(
                "candidate {:?} has probability {}",
                c.word, c.probability
            )));
        }
    }
    if candidates.windows(2).any(|w| w[0].probability < w[1].probability) {
        return Err(ProviderError::Malformed("candidates not in descending order".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Other,
}

pub trait MaskFiller: Send + Sync {
    /// Top-`k` whole-word candidates in descending probability. The top-k
    /// list must be a prefix of the top-(k+1) list.
    fn mask_fill(&self, query: &MaskFillQuery) -> Result<Vec<MaskFillCandidate>, ProviderError>;
}

pub trait TextEmbedder: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait ImageEmbedder: Send + Sync {
    fn embed_image(&self, image_id: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait PosTagger: Send + Sync {
    /// One tag per entry of `words`.
    fn tag(&self, words: &[String]) -> Result<Vec<PosTag>, ProviderError>;
}

/// Everything the augmenter needs, bundled for one worker.
#[derive(Clone)]
pub struct Providers {
    pub mask_filler: Arc<dyn MaskFiller>,
    pub text_embedder: Arc<dyn TextEmbedder>,
    pub image_embedder: Arc<dyn ImageEmbedder>,
    pub pos_tagger: Arc<dyn PosTagger>,
    /// Word vectors for matching text nouns to detected object labels.
    pub match_table: Arc<WordEmbeddingTable>,
    /// Word vectors for candidate-to-attribute similarity.
    pub attribute_table: Arc<WordEmbeddingTable>,
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers")
            .field("match_table", &self.match_table.len())
            .field("attribute_table", &self.attribute_table.len())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tokenize;

    #[test]
    fn query_marks_position() {
        let q = MaskFillQuery::at(&tokenize("a car."), 1, 3);
        assert_eq!(q.text, "a [MASK] car.");
        assert_eq!(q.tokens, ["a", "[MASK]", "car", "."]);
        assert_eq!(q.next_word().as_deref(), Some("car"));
    }

    #[test]
    fn candidate_contract() {
        let ok = vec![MaskFillCandidate::new("red", 0.5), MaskFillCandidate::new("old", 0.2)];
        assert!(check_candidates(&ok, 3).is_ok());
        assert!(check_candidates(&ok, 1).is_err());
        let unordered = vec![MaskFillCandidate::new("a", 0.1), MaskFillCandidate::new("b", 0.2)];
        assert!(check_candidates(&unordered, 3).is_err());
        let zero = vec![MaskFillCandidate::new("a", 0.0)];
        assert!(check_candidates(&zero, 3).is_err());
    }
}
