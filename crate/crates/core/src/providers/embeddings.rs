use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::tokenize;

/// Word vectors keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordEmbeddingTable {
    dimension: Option<usize>,
    entries: BTreeMap<String, Vec<f64>>,
}

impl WordEmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a GloVe-style text file: `word v1 v2 ... vD` per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    pub fn from_reader(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let mut table = WordEmbeddingTable::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let vector = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, n + 1, format!("bad number: {e}")))?;
            if vector.is_empty() {
                return Err(Error::parse(origin, n + 1, format!("no vector for {word:?}")));
            }
            table
                .insert(word, vector)
                .map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        }
        Ok(table)
    }

    /// Adds or replaces a vector. The first insert fixes the dimension.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        match self.dimension {
            Some(d) if d != vector.len() => {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: vector.len(),
                })
            }
            None => self.dimension = Some(vector.len()),
            _ => {}
        }
        if self.entries.insert(word.to_lowercase(), vector).is_some() {
            log::warn!("duplicate embedding for {word:?}; keeping the last one");
        }
        Ok(())
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Entries in lexicographic word order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// Mean vector of the in-vocabulary words of `phrase`; `None` if none are known.
    pub fn phrase_vector(&self, phrase: &str) -> Option<Vec<f64>> {
        let stream = tokenize(phrase);
        let vectors: Vec<&[f64]> = stream.words().filter_map(|t| self.get(&t.lower)).collect();
        mean_vector(&vectors)
    }

    /// Most similar other word by cosine; ties go to the lexicographically
    /// smaller word.
    pub fn nearest_neighbor(&self, word: &str) -> Option<&str> {
        let key = word.to_lowercase();
        let query = self.entries.get(&key)?;
        let mut best: Option<(&str, f64)> = None;
        for (other, v) in self.iter() {
            if other == key {
                continue;
            }
            let sim = cosine(query, v).unwrap_or(0.0);
            if best.map_or(true, |(_, b)| sim > b) {
                best = Some((other, sim));
            }
        }
        best.map(|(w, _)| w)
    }
}

pub fn mean_vector(vectors: &[&[f64]]) -> Option<Vec<f64>> {
    let first = vectors.first()?;
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        for (acc, x) in sum.iter_mut().zip(v.iter()) {
            *acc += x;
        }
    }
    let n = vectors.len() as f64;
    Some(sum.into_iter().map(|x| x / n).collect())
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}
