//! Domain types shared by the augmenter, baselines, metrics and harness.

mod prng;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use prng::{stable_hash, SplitMix64};
pub use tokenize::{tokenize, Token, TokenKind, TokenStream};

/// Three-way entailment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Contradiction,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "e" => Ok(Label::Entailment),
            "contradiction" | "c" => Ok(Label::Contradiction),
            "neutral" | "n" => Ok(Label::Neutral),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One image-text pair of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
}

/// A detected object with its single attribute phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "object")]
    pub object_label: String,
    #[serde(rename = "attribute", default)]
    pub attribute_phrase: String,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl Detection {
    pub fn new(object: impl Into<String>, attribute: impl Into<String>) -> Self {
        Detection {
            object_label: object.into(),
            attribute_phrase: attribute.into(),
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("lambda{index} must be finite, got {value}")]
    NonFiniteLambda { index: usize, value: f64 },
    #[error("max_gallery must be positive")]
    ZeroGallery,
}

/// Hyper-parameters of one augmentation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Weight of the normalized mask-fill probability.
    pub lambda1: f64,
    /// Weight of the normalized attribute similarity.
    pub lambda2: f64,
    /// Weight of the normalized cross-modal distance.
    pub lambda3: f64,
    /// Number of mask-fill candidates requested per site.
    pub k: usize,
    /// Cosine threshold for matching text nouns to detected objects.
    pub threshold: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gallery: Option<usize>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            lambda1: 1.0,
            lambda2: 5.0,
            lambda3: 5.0,
            k: 3,
            threshold: 0.7,
            seed: 0,
            max_gallery: None,
        }
    }
}

impl AugmentationConfig {
    pub fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    /// Checks the invariants and hands the config back unchanged.
    ///
    /// Negative weights are legal (they invert a component's effect) and only
    /// produce a log note.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::ZeroK);
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        for (i, value) in self.lambdas().into_iter().enumerate() {
            if !value.is_finite() {
                return Err(ConfigError::NonFiniteLambda { index: i + 1, value });
            }
            if value < 0.0 {
                log::info!("lambda{} is negative ({value}); component acts inverted", i + 1);
            }
        }
        if self.max_gallery == Some(0) {
            return Err(ConfigError::ZeroGallery);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Direct,
    NounFallback,
}

/// A position where an attribute word may be inserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSite {
    /// Index into the original token stream; always a word token.
    #[serde(rename = "index")]
    pub insert_before_index: usize,
    #[serde(rename = "object")]
    pub object_label: String,
    #[serde(rename = "attribute")]
    pub attribute_phrase: String,
    pub match_kind: MatchKind,
    pub match_similarity: f64,
}

/// A scored mask-fill candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInsertion {
    pub word: String,
    /// Raw probability reported by the mask filler.
    pub probability: f64,
    /// Raw attribute similarity; `None` when undefined for this site.
    pub similarity: Option<f64>,
    /// Raw cross-modal distance in [0, 2].
    pub distance: f64,
    pub p: f64,
    pub s: f64,
    pub d: f64,
    pub score: f64,
}

/// A raw candidate rejected before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredCandidate {
    pub word: String,
    pub probability: f64,
    pub reason: String,
}

/// What happened at one mask site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    #[serde(flatten)]
    pub site: MaskSite,
    /// Index of the mask in the working stream at the time it was filled.
    pub mask_index: usize,
    pub chosen: Option<CandidateInsertion>,
    pub rejected: Vec<CandidateInsertion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filtered: Vec<FilteredCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_reason: Option<String>,
}

impl Decision {
    /// All scored candidates in provider order.
    pub fn scored(&self) -> Vec<&CandidateInsertion> {
        let mut all: Vec<&CandidateInsertion> = self.rejected.iter().collect();
        if let Some(chosen) = &self.chosen {
            all.push(chosen);
        }
        all
    }
}

/// Output of augmenting one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationResult {
    #[serde(rename = "id")]
    pub example_id: String,
    pub image_id: String,
    #[serde(rename = "original")]
    pub original_text: String,
    #[serde(rename = "augmented")]
    pub augmented_text: String,
    #[serde(default)]
    pub fallback_used: bool,
    pub decisions: Vec<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AugmentationResult {
    pub fn unchanged(example: &Example) -> Self {
        AugmentationResult {
            example_id: example.id.clone(),
            image_id: example.image_id.clone(),
            original_text: example.text.clone(),
            augmented_text: example.text.clone(),
            fallback_used: false,
            decisions: Vec::new(),
            baseline: None,
            error: None,
        }
    }

    pub fn inserted_words(&self) -> Vec<&str> {
        self.decisions
            .iter()
            .filter_map(|d| d.chosen.as_ref().map(|c| c.word.as_str()))
            .collect()
    }

    /// True when the original word tokens form a subsequence of the augmented
    /// word tokens and the gap tokens are exactly the chosen words, in order.
    pub fn satisfies_subsequence_invariant(&self) -> bool {
        let original = tokenize(&self.original_text).word_lowers();
        let augmented = tokenize(&self.augmented_text).word_lowers();
        let inserted: Vec<String> = self
            .inserted_words()
            .iter()
            .map(|w| w.to_lowercase())
            .collect();

        let mut gaps = Vec::new();
        let mut next = 0;
        for word in &augmented {
            if next < original.len() && *word == original[next] {
                next += 1;
            } else {
                gaps.push(word.clone());
            }
        }
        // Greedy matching can misattribute a gap word equal to the next
        // original word; fall back to checking the interleaving directly.
        if next == original.len() && gaps == inserted {
            return true;
        }
        interleaves(&augmented, &original, &inserted)
    }
}

/// Whether `merged` is an interleaving of `a` and `b`, both kept in order.
fn interleaves(merged: &[String], a: &[String], b: &[String]) -> bool {
    if merged.len() != a.len() + b.len() {
        return false;
    }
    let mut reachable = vec![false; b.len() + 1];
    reachable[0] = true;
    for j in 1..=b.len() {
        reachable[j] = reachable[j - 1] && b[j - 1] == merged[j - 1];
    }
    for i in 1..=a.len() {
        reachable[0] = reachable[0] && a[i - 1] == merged[i - 1];
        for j in 1..=b.len() {
            let m = &merged[i + j - 1];
            reachable[j] = (reachable[j] && a[i - 1] == *m) || (reachable[j - 1] && b[j - 1] == *m);
        }
    }
    reachable[b.len()]
}
