//! Retrieval, text-overlap and classification metrics.

mod classification;
pub mod porter;
mod retrieval;
mod text;

pub use classification::{classification_report, ClassificationReport};
pub use retrieval::{axiom_violation_rate, mrr, rank_gallery, QueryRank, RetrievalRun};
pub use text::{bleu, chunk_count, meteor_alignment, meteor_lite, Alignment, BLEU_EPSILON};

use crate::error::{Error, Result};
use crate::model::tokenize;
use crate::providers::cosine;

/// Lowercased word tokens, the unit every text metric works on.
pub fn word_tokens(text: &str) -> Vec<String> {
    tokenize(text).word_lowers()
}

/// Number of augmented tokens outside a longest common subsequence with the
/// original.
pub fn count_insertions(original: &[String], augmented: &[String]) -> usize {
    let n = original.len();
    let mut prev = vec![0usize; n + 1];
    let mut cur = vec![0usize; n + 1];
    for a in augmented {
        for (j, o) in original.iter().enumerate() {
            cur[j + 1] = if a == o { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    augmented.len() - prev[n]
}

/// Mean cosine over embedding pairs.
pub fn corpus_similarity(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Invalid("similarity of an empty corpus".into()));
    }
    let mut sum = 0.0;
    for (a, b) in pairs {
        sum += cosine(a, b)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
