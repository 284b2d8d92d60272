use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{tokenize, FilteredCandidate, TokenKind, TokenStream};
use crate::providers::{cosine, MaskFillCandidate, ProviderError, TextEmbedder, WordEmbeddingTable};

/// Tokens on each side of a mask whose words a candidate may not repeat.
pub const NEIGHBORHOOD: usize = 3;

/// Drops stopwords, words already present within [`NEIGHBORHOOD`] tokens of
/// the mask (which sits just before `mask_index`), and anything that is not a
/// single word token. Order is preserved.
pub fn filter_candidates(
    raw: &[MaskFillCandidate],
    tokens: &TokenStream,
    mask_index: usize,
    stopwords: &HashSet<String>,
) -> (Vec<MaskFillCandidate>, Vec<FilteredCandidate>) {
    let toks = tokens.tokens();
    let lo = mask_index.saturating_sub(NEIGHBORHOOD);
    let hi = (mask_index + NEIGHBORHOOD).min(toks.len());
    let window: HashSet<&str> = toks[lo..hi].iter().map(|t| t.lower.as_str()).collect();

    let mut kept = Vec::new();
    let mut filtered = Vec::new();
    for cand in raw {
        let lower = cand.word.to_lowercase();
        let reason = if !is_single_word(&cand.word) {
            Some("not a single word")
        } else if stopwords.contains(&lower) {
            Some("stopword")
        } else if window.contains(lower.as_str()) {
            Some("in neighborhood")
        } else {
            None
        };
        match reason {
            Some(reason) => filtered.push(FilteredCandidate {
                word: cand.word.clone(),
                probability: cand.probability,
                reason: reason.to_string(),
            }),
            None => kept.push(cand.clone()),
        }
    }
    (kept, filtered)
}

fn is_single_word(word: &str) -> bool {
    let ts = tokenize(word);
    ts.len() == 1 && ts.tokens()[0].kind == TokenKind::Word && ts.tokens()[0].leading.is_empty() && ts.render() == word
}

/// Scales non-negative values to sum to one; all zeros become uniform.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Invalid(format!("cannot normalize value {bad}")));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let sum: f64 = values.iter().sum();
    if sum == 0.0 {
        let u = 1.0 / values.len() as f64;
        return Ok(vec![u; values.len()]);
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

/// Cosine between the candidate word and the mean of the attribute phrase's
/// known words, clamped to [0, 1]. `None` when either side has no vector.
pub fn attribute_similarity(table: &WordEmbeddingTable, candidate: &str, attribute_phrase: &str) -> Option<f64> {
    let word = table.get(candidate)?;
    let phrase = table.phrase_vector(attribute_phrase)?;
    cosine(word, &phrase).ok().map(|c| c.clamp(0.0, 1.0))
}

/// `1 - cosine` between the candidate text and the image, in [0, 2].
pub fn cross_modal_distance(
    embedder: &dyn TextEmbedder,
    candidate_text: &str,
    image_embedding: &[f64],
) -> Result<f64, ProviderError> {
    let text = embedder.embed_text(candidate_text)?;
    let c = cosine(&text, image_embedding).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    Ok(1.0 - c)
}

pub fn score(p: f64, s: f64, d: f64, lambdas: [f64; 3]) -> f64 {
    lambdas[0] * p + lambdas[1] * s + lambdas[2] * d
}

fn effectively_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Index of the highest combined score; the earliest (most probable)
/// candidate wins ties. `None` for an empty set.
pub fn select_insertion(p: &[f64], s: &[f64], d: &[f64], lambdas: [f64; 3]) -> Option<usize> {
    assert!(p.len() == s.len() && s.len() == d.len(), "component lists must align");
    let scores: Vec<f64> = (0..p.len()).map(|i| score(p[i], s[i], d[i], lambdas)).collect();
    argmax_first(&scores)
}

pub(crate) fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if v > scores[b] && !effectively_equal(v, scores[b]) => best = Some(i),
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmenter::stopwords::english_stopwords;

    fn cands(words: &[&str]) -> Vec<MaskFillCandidate> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| MaskFillCandidate::new(*w, 1.0 / (i + 1) as f64))
            .collect()
    }

    fn kept_words(kept: &[MaskFillCandidate]) -> Vec<&str> {
        kept.iter().map(|c| c.word.as_str()).collect()
    }

    #[test]
    fn stopwords_filtered() {
        let ts = tokenize("a girl on a chair");
        let (kept, filtered) = filter_candidates(&cands(&["the", "wooden"]), &ts, 4, english_stopwords());
        assert_eq!(kept_words(&kept), ["wooden"]);
        assert_eq!(filtered[0].reason, "stopword");
    }

    #[test]
    fn neighborhood_filtered_at_distance_one() {
        let ts = tokenize("a girl on a chair");
        let (kept, _) = filter_candidates(&cands(&["chair", "Girl", "wooden"]), &ts, 4, english_stopwords());
        // "girl" is 3 tokens before the mask, "chair" right after it.
        assert_eq!(kept_words(&kept), ["wooden"]);
    }

    #[test]
    fn outside_window_kept() {
        // mask before index 5 ("cat"); "dog" at index 1 is 4 tokens away.
        let ts = tokenize("a dog and the big cat");
        let (kept, _) = filter_candidates(&cands(&["dog"]), &ts, 5, english_stopwords());
        assert_eq!(kept_words(&kept), ["dog"]);
        let (kept, _) = filter_candidates(&cands(&["dog"]), &ts, 4, english_stopwords());
        assert!(kept.is_empty());
    }

    #[test]
    fn multiword_and_punct_candidates_filtered() {
        let ts = tokenize("a car");
        let (kept, filtered) = filter_candidates(&cands(&["dark red", ",", "", "##ish", "red"]), &ts, 1, english_stopwords());
        assert_eq!(kept_words(&kept), ["red"]);
        assert_eq!(filtered.len(), 4);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 3.0, 5.0]).unwrap(), [0.2, 0.3, 0.5]);
        let u = normalize(&[0.0, 0.0, 0.0]).unwrap();
        assert!(u.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(normalize(&[1.0]).unwrap(), [1.0]);
        assert!(normalize(&[-1.0, 2.0]).is_err());
        assert!(normalize(&[f64::NAN]).is_err());
    }

    #[test]
    fn attribute_similarity_examples() {
        let mut t = WordEmbeddingTable::new();
        t.insert("red", vec![1.0, 0.0]).unwrap();
        t.insert("blue", vec![0.0, 1.0]).unwrap();
        t.insert("dark", vec![-1.0, 0.0]).unwrap();
        assert_eq!(attribute_similarity(&t, "red", "red"), Some(1.0));
        assert_eq!(attribute_similarity(&t, "blue", "red"), Some(0.0));
        let mixed = attribute_similarity(&t, "red", "red blue").unwrap();
        assert!((mixed - 0.70710678).abs() < 1e-8);
        assert_eq!(attribute_similarity(&t, "dark", "red"), Some(0.0));
        assert_eq!(attribute_similarity(&t, "green", "red"), None);
        assert_eq!(attribute_similarity(&t, "red", ""), None);
        assert_eq!(attribute_similarity(&t, "red", "purple"), None);
    }

    struct Fixed(Vec<f64>);
    impl TextEmbedder for Fixed {
        fn embed_text(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn distance_examples() {
        let same = cross_modal_distance(&Fixed(vec![1.0, 0.0]), "x", &[1.0, 0.0]).unwrap();
        assert_eq!(same, 0.0);
        assert_eq!(cross_modal_distance(&Fixed(vec![0.0, 1.0]), "x", &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cross_modal_distance(&Fixed(vec![-1.0, 0.0]), "x", &[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn selection_hand_computed() {
        let p = [0.5, 0.3, 0.2];
        let s = [0.1, 0.6, 0.3];
        let d = [0.4, 0.2, 0.4];
        let scores: Vec<f64> = (0..3).map(|i| score(p[i], s[i], d[i], [1.0, 5.0, 5.0])).collect();
        for (got, want) in scores.iter().zip([3.0, 4.3, 3.7]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(select_insertion(&p, &s, &d, [1.0, 5.0, 5.0]), Some(1));
        assert_eq!(select_insertion(&p, &s, &d, [1.0, 0.0, 0.0]), Some(0));
        assert_eq!(select_insertion(&p, &s, &d, [2.0, 10.0, 10.0]), Some(1));
        assert_eq!(select_insertion(&[], &[], &[], [1.0, 5.0, 5.0]), None);
    }

    #[test]
    fn ties_go_to_first() {
        assert_eq!(argmax_first(&[1.0, 1.0, 0.5]), Some(0));
        assert_eq!(argmax_first(&[0.1, 0.3, 0.3]), Some(1));
    }
}
