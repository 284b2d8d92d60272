//! Text-only comparison augmenters: random deletion and a simplified EDA.
//!
//! Both are deterministic given the per-example [`SplitMix64`] stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AugmentationResult, Example, SplitMix64, TokenKind, TokenStream, tokenize};
use crate::providers::WordEmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Deletion,
    Eda,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Deletion => "deletion",
            BaselineKind::Eda => "eda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub rate: f64,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn validate(self) -> Result<Self> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Invalid(format!("baseline rate must lie in [0, 1], got {}", self.rate)));
        }
        Ok(self)
    }
}

/// Deletes each word token with probability `rate`. Punctuation stays; at
/// least one word always survives.
pub fn delete_augment(tokens: &TokenStream, rate: f64, rng: &mut SplitMix64) -> TokenStream {
    let words = tokens.word_indices();
    let mut doomed: Vec<usize> = words.iter().copied().filter(|_| rng.chance(rate)).collect();
    if !words.is_empty() && doomed.len() == words.len() {
        doomed.remove(0);
    }
    let mut out = tokens.clone();
    for &i in doomed.iter().rev() {
        out = out.without(i);
    }
    out
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Synonym replacement, random insertion, random swap and random deletion,
/// applied in that order. Synonyms are nearest neighbours in `synonyms`.
pub fn eda_augment(
    tokens: &TokenStream,
    alpha: f64,
    rng: &mut SplitMix64,
    synonyms: &WordEmbeddingTable,
) -> TokenStream {
    let word_count = tokens.word_indices().len();
    if word_count == 0 {
        return tokens.clone();
    }
    let n = ((alpha * word_count as f64).round() as usize).max(1);
    let mut out = tokens.clone();

    // synonym replacement
    let mut replaceable: Vec<(usize, String)> = out
        .word_indices()
        .into_iter()
        .filter_map(|i| {
            let t = &out.tokens()[i];
            synonyms.nearest_neighbor(&t.lower).map(|s| (i, s.to_string()))
        })
        .collect();
    rng.shuffle(&mut replaceable);
    for (i, synonym) in replaceable.into_iter().take(n) {
        let replacement = match_case(&out.tokens()[i].surface, &synonym);
        out.replace_surface(i, &replacement);
    }

    // random insertion
    for _ in 0..n {
        let words = out.word_indices();
        let sources: Vec<&str> = words
            .iter()
            .filter_map(|&i| synonyms.nearest_neighbor(&out.tokens()[i].lower))
            .collect();
        if sources.is_empty() {
            break;
        }
        let word = sources[rng.below(sources.len())].to_string();
        let slot = rng.below(words.len() + 1);
        let at = if slot < words.len() { words[slot] } else { words[words.len() - 1] + 1 };
        out = out.with_inserted(at, &word, TokenKind::Word);
    }

    // random swap
    for _ in 0..n {
        let words = out.word_indices();
        if words.len() < 2 {
            break;
        }
        let a = words[rng.below(words.len())];
        let b = words[rng.below(words.len())];
        out.swap_surfaces(a, b);
    }

    delete_augment(&out, alpha, rng)
}

/// Applies a baseline to one example with its own deterministic stream.
pub fn augment_baseline(
    example: &Example,
    config: &BaselineConfig,
    synonyms: &WordEmbeddingTable,
) -> AugmentationResult {
    let mut rng = SplitMix64::for_example(config.seed, &example.id);
    let tokens = tokenize(&example.text);
    let out = match config.kind {
        BaselineKind::Deletion => delete_augment(&tokens, config.rate, &mut rng),
        BaselineKind::Eda => eda_augment(&tokens, config.rate, &mut rng, synonyms),
    };
    let mut result = AugmentationResult::unchanged(example);
    result.augmented_text = out.render();
    result.baseline = Some(config.kind.name().to_string());
    result
}
