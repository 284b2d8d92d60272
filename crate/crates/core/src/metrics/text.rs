//! Sentence-level BLEU and an exact-plus-stem METEOR variant.

use std::collections::HashMap;

use super::porter::stem;

/// Numerator used in place of a zero n-gram match count.
pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// BLEU with uniform weights over n = 1..=min(max_n, |hypothesis|), clipped
/// n-gram precision and the usual brevity penalty. Zero match counts are
/// replaced by [`BLEU_EPSILON`].
pub fn bleu(reference: &[String], hypothesis: &[String], max_n: usize) -> f64 {
    let orders = max_n.min(hypothesis.len());
    if orders == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let hyp = ngram_counts(hypothesis, n);
        let reference = ngram_counts(reference, n);
        let matched: usize = hyp
            .iter()
            .map(|(gram, &c)| c.min(reference.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = (hypothesis.len() + 1 - n) as f64;
        let numerator = if matched == 0 { BLEU_EPSILON } else { matched as f64 };
        log_sum += (numerator / total).ln();
    }
    let brevity = if hypothesis.len() < reference.len() {
        (1.0 - reference.len() as f64 / hypothesis.len() as f64).exp()
    } else {
        1.0
    };
    (brevity * (log_sum / orders as f64).exp()).clamp(0.0, 1.0)
}

/// A matched (hypothesis position, reference position) pair.
pub type Alignment = Vec<(usize, usize)>;

/// Exact matches first, then Porter-stem matches among the leftovers. Each
/// hypothesis token, left to right, takes the leftmost unused reference token
/// that matches it. Sorted by hypothesis position.
pub fn meteor_alignment(reference: &[String], hypothesis: &[String]) -> Alignment {
    let mut ref_used = vec![false; reference.len()];
    let mut hyp_match: Vec<Option<usize>> = vec![None; hypothesis.len()];

    let stages: [&dyn Fn(&str) -> String; 2] = [&|w: &str| w.to_string(), &|w: &str| stem(w)];
    for normalize in stages {
        let ref_forms: Vec<String> = reference.iter().map(|w| normalize(w)).collect();
        for (h, word) in hypothesis.iter().enumerate() {
            if hyp_match[h].is_some() {
                continue;
            }
            let form = normalize(word);
            if let Some(r) = (0..reference.len()).find(|&r| !ref_used[r] && ref_forms[r] == form) {
                ref_used[r] = true;
                hyp_match[h] = Some(r);
            }
        }
    }
    hyp_match
        .into_iter()
        .enumerate()
        .filter_map(|(h, r)| r.map(|r| (h, r)))
        .collect()
}

/// Runs of matches adjacent in both sentences. `alignment` sorted by hypothesis position.
pub fn chunk_count(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// METEOR without the synonym stage: `F = 10PR / (R + 9P)` scaled by
/// `1 - 0.5 (chunks / matches)^3`.
pub fn meteor_lite(reference: &[String], hypothesis: &[String]) -> f64 {
    let alignment = meteor_alignment(reference, hypothesis);
    meteor_from_alignment(&alignment, reference.len(), hypothesis.len())
}

pub(crate) fn meteor_from_alignment(alignment: &[(usize, usize)], ref_len: usize, hyp_len: usize) -> f64 {
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let precision = m as f64 / hyp_len as f64;
    let recall = m as f64 / ref_len as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let fragmentation = chunk_count(alignment) as f64 / m as f64;
    let penalty = 0.5 * fragmentation.powi(3);
    f_mean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_identity() {
        let s = toks("a man rides a red bike");
        assert!((bleu(&s, &s, 4) - 1.0).abs() < 1e-12);
        let short = toks("dog");
        assert!((bleu(&short, &short, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_longer_hypothesis() {
        // Clipped precisions 4/5, 3/4, 2/3, 1/2; no brevity penalty.
        let v = bleu(&toks("a b c d"), &toks("a b c d e"), 4);
        assert!((v - 0.668_740_304_976_422).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bleu_no_overlap_is_floor() {
        assert!(bleu(&toks("a b"), &toks("c d"), 4) < 1e-6);
        assert_eq!(bleu(&toks("a b"), &[], 4), 0.0);
    }

    #[test]
    fn meteor_examples() {
        let v = meteor_lite(&toks("the cat"), &toks("the cat"));
        assert!((v - 0.9375).abs() < 1e-12);
        assert_eq!(meteor_lite(&toks("a b"), &toks("c d")), 0.0);
        let stemmed = meteor_lite(&toks("runs"), &toks("running"));
        assert!((stemmed - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_stage_runs_before_stem_stage() {
        // "runs" in the hypothesis must take the exact "runs", not stem-match "run".
        let a = meteor_alignment(&toks("run runs"), &toks("runs"));
        assert_eq!(a, vec![(0, 1)]);
    }

    #[test]
    fn chunks() {
        assert_eq!(chunk_count(&[(0, 0), (1, 1), (2, 2)]), 1);
        assert_eq!(chunk_count(&[(0, 1), (1, 0)]), 2);
        assert_eq!(chunk_count(&[(0, 0), (2, 1)]), 2);
        assert_eq!(chunk_count(&[]), 0);
    }
}
