//! Deterministic file-backed stand-ins for the pretrained models.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use super::{
    check_candidates, mean_vector, ImageEmbedder, MaskFillCandidate, MaskFillQuery, MaskFiller,
    PosTag, PosTagger, ProviderError, TextEmbedder, WordEmbeddingTable,
};
use crate::error::{Error, Result};
use crate::model::tokenize;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Mask filler keyed on the lowercase word right after the mask.
#[derive(Debug, Clone, Default)]
pub struct FixtureMaskFiller {
    table: HashMap<String, Vec<MaskFillCandidate>>,
}

impl FixtureMaskFiller {
    pub fn new(table: HashMap<String, Vec<MaskFillCandidate>>) -> Self {
        let table = table
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        FixtureMaskFiller { table }
    }

    /// Reads a JSON object mapping word to an array of `[word, probability]` pairs.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw: BTreeMap<String, Vec<(String, f64)>> = serde_json::from_str(&read(path)?)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        let mut table = HashMap::new();
        for (key, list) in raw {
            let candidates: Vec<MaskFillCandidate> = list
                .into_iter()
                .map(|(w, p)| MaskFillCandidate::new(w, p))
                .collect();
            check_candidates(&candidates, candidates.len())
                .map_err(|e| Error::parse(path, 0, format!("entry {key:?}: {e}")))?;
            table.insert(key, candidates);
        }
        Ok(FixtureMaskFiller::new(table))
    }
}

impl MaskFiller for FixtureMaskFiller {
    fn mask_fill(&self, query: &MaskFillQuery) -> Result<Vec<MaskFillCandidate>, ProviderError> {
        let Some(key) = query.next_word() else {
            return Ok(Vec::new());
        };
        Ok(self
            .table
            .get(&key)
            .map(|list| list.iter().take(query.k).cloned().collect())
            .unwrap_or_default())
    }
}

/// Text encoder: L2-normalized mean of in-vocabulary word vectors.
#[derive(Debug, Clone)]
pub struct FixtureTextEmbedder {
    table: Arc<WordEmbeddingTable>,
}

impl FixtureTextEmbedder {
    pub fn new(table: Arc<WordEmbeddingTable>) -> Self {
        FixtureTextEmbedder { table }
    }
}

impl TextEmbedder for FixtureTextEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let stream = tokenize(text);
        let vectors: Vec<&[f64]> = stream
            .words()
            .filter_map(|t| self.table.get(&t.lower))
            .collect();
        let dim = self.table.dimension().unwrap_or(0);
        let Some(mean) = mean_vector(&vectors) else {
            return Ok(vec![0.0; dim]);
        };
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(mean);
        }
        Ok(mean.into_iter().map(|x| x / norm).collect())
    }
}

/// Image encoder backed by precomputed vectors.
#[derive(Debug, Clone, Default)]
pub struct FixtureImageEmbedder {
    vectors: HashMap<String, Vec<f64>>,
}

impl FixtureImageEmbedder {
    pub fn new(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let mut dims = vectors.values().map(Vec::len);
        if let Some(first) = dims.next() {
            if let Some(bad) = dims.find(|&d| d != first) {
                return Err(Error::DimensionMismatch {
                    left: first,
                    right: bad,
                });
            }
        }
        Ok(FixtureImageEmbedder { vectors })
    }

    /// Reads a JSON object mapping image id to an array of floats.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let vectors: HashMap<String, Vec<f64>> = serde_json::from_str(&read(path)?)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::new(vectors)
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.vectors.contains_key(image_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

impl ImageEmbedder for FixtureImageEmbedder {
    fn embed_image(&self, image_id: &str) -> Result<Vec<f64>, ProviderError> {
        self.vectors
            .get(image_id)
            .cloned()
            .ok_or_else(|| ProviderError::MissingImage(image_id.to_string()))
    }
}

/// Lexicon-based noun tagger; unknown words are `other`.
#[derive(Debug, Clone, Default)]
pub struct FixturePosTagger {
    lexicon: HashMap<String, PosTag>,
}

impl FixturePosTagger {
    pub fn new(lexicon: HashMap<String, PosTag>) -> Self {
        let lexicon = lexicon
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        FixturePosTagger { lexicon }
    }

    /// Reads `word<TAB>tag` lines with tags `noun` or `other`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut lexicon = HashMap::new();
        for (n, line) in read(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, n + 1, "expected word<TAB>tag"))?;
            let tag = match tag.trim() {
                "noun" => PosTag::Noun,
                "other" => PosTag::Other,
                t => return Err(Error::parse(path, n + 1, format!("unknown tag {t:?}"))),
            };
            lexicon.insert(word.trim().to_string(), tag);
        }
        Ok(FixturePosTagger::new(lexicon))
    }
}

impl PosTagger for FixturePosTagger {
    fn tag(&self, words: &[String]) -> Result<Vec<PosTag>, ProviderError> {
        Ok(words
            .iter()
            .map(|w| {
                self.lexicon
                    .get(&w.to_lowercase())
                    .copied()
                    .unwrap_or(PosTag::Other)
            })
            .collect())
    }
}
