use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::report::{published_reference, EvalReport, MetricRow, Task};
use crate::error::{Error, Result};
use crate::metrics::{
    axiom_violation_rate, bleu, classification_report, count_insertions, mean_std, meteor_lite,
    mrr, rank_gallery, word_tokens, QueryRank, RetrievalRun,
};
use crate::model::{Example, Label};
use crate::providers::{cosine, ImageEmbedder, TextEmbedder};

/// Overlap statistics between original and augmented texts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub bleu: f64,
    pub meteor: f64,
    /// Each original scored against itself.
    pub bleu_original: f64,
    pub meteor_original: f64,
    pub mean_insertions: f64,
    pub std_insertions: f64,
}

/// Averages over `(original, augmented)` pairs, in the order given.
pub fn text_metrics(pairs: &[(&str, &str)]) -> TextMetrics {
    let n = pairs.len().max(1) as f64;
    let mut m = TextMetrics {
        bleu: 0.0,
        meteor: 0.0,
        bleu_original: 0.0,
        meteor_original: 0.0,
        mean_insertions: 0.0,
        std_insertions: 0.0,
    };
    let mut insertions = Vec::with_capacity(pairs.len());
    for (orig, aug) in pairs {
        let o = word_tokens(orig);
        let a = word_tokens(aug);
        m.bleu += bleu(&o, &a, 4);
        m.meteor += meteor_lite(&o, &a);
        m.bleu_original += bleu(&o, &o, 4);
        m.meteor_original += meteor_lite(&o, &o);
        insertions.push(count_insertions(&o, &a) as f64);
    }
    m.bleu /= n;
    m.meteor /= n;
    m.bleu_original /= n;
    m.meteor_original /= n;
    (m.mean_insertions, m.std_insertions) = mean_std(&insertions);
    m
}

fn augmented_for<'a>(corpus: &[&'a Example], augmented: &'a BTreeMap<String, String>) -> Result<Vec<&'a str>> {
    let missing: Vec<&str> = corpus
        .iter()
        .filter(|ex| !augmented.contains_key(&ex.id))
        .map(|ex| ex.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!("no augmented text for ids: {}", missing.join(", "))));
    }
    Ok(corpus.iter().map(|ex| augmented[&ex.id].as_str()).collect())
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

/// Text-to-image retrieval before and after augmentation.
///
/// The gallery is every image referenced by the corpus, sorted by id. With
/// `max_gallery` only the first `max_gallery` images are kept and queries
/// whose image fell out are dropped. Queries run in id order.
pub fn evaluate_retrieval(
    corpus: &[Example],
    augmented: &BTreeMap<String, String>,
    text: &dyn TextEmbedder,
    image: &dyn ImageEmbedder,
    max_gallery: Option<usize>,
    method: &str,
) -> Result<EvalReport> {
    let mut gallery_ids: Vec<&str> = corpus
        .iter()
        .map(|ex| ex.image_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if let Some(cap) = max_gallery {
        gallery_ids.truncate(cap);
    }
    let kept: BTreeSet<&str> = gallery_ids.iter().copied().collect();
    let mut queries: Vec<&Example> = corpus.iter().filter(|ex| kept.contains(ex.image_id.as_str())).collect();
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    if queries.is_empty() {
        return Err(Error::Invalid("retrieval evaluation needs at least one query".into()));
    }
    let aug_texts = augmented_for(&queries, augmented)?;

    let mut gallery = Vec::with_capacity(gallery_ids.len());
    let mut missing = Vec::new();
    for id in &gallery_ids {
        match image.embed_image(id) {
            Ok(v) => gallery.push((*id, v)),
            Err(crate::providers::ProviderError::MissingImage(_)) => missing.push(*id),
            Err(e) => return Err(e.into()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Invalid(format!("no embedding for images: {}", missing.join(", "))));
    }
    let image_of: BTreeMap<&str, &[f64]> = gallery.iter().map(|(id, v)| (*id, v.as_slice())).collect();
    let gallery_view = || gallery.iter().map(|(id, v)| (*id, v.as_slice()));

    let mut orig_run = RetrievalRun::default();
    let mut aug_run = RetrievalRun::default();
    let (mut sim_tt, mut sim_it_orig, mut sim_it_aug) = (Vec::new(), Vec::new(), Vec::new());
    for (ex, aug) in queries.iter().zip(&aug_texts) {
        let e_orig = text.embed_text(&ex.text)?;
        let e_aug = text.embed_text(aug)?;
        let img = image_of[ex.image_id.as_str()];
        for (run, emb) in [(&mut orig_run, &e_orig), (&mut aug_run, &e_aug)] {
            run.queries.push(QueryRank {
                query_id: ex.id.clone(),
                gt_image_id: ex.image_id.clone(),
                rank: rank_gallery(emb, gallery_view(), &ex.image_id)?,
                gallery_size: gallery.len(),
            });
        }
        sim_tt.push(cosine(&e_orig, &e_aug)?);
        sim_it_orig.push(cosine(&e_orig, img)?);
        sim_it_aug.push(cosine(&e_aug, img)?);
    }

    let pairs: Vec<(&str, &str)> = queries.iter().zip(&aug_texts).map(|(ex, a)| (ex.text.as_str(), *a)).collect();
    let tm = text_metrics(&pairs);
    let original = MetricRow {
        mrr: Some(mrr(&orig_run)?),
        sim_tt: Some(1.0),
        sim_it: Some(mean(sim_it_orig)),
        bleu: Some(tm.bleu_original),
        meteor: Some(tm.meteor_original),
        ..MetricRow::labelled("original")
    };
    let augmented_row = MetricRow {
        mrr: Some(mrr(&aug_run)?),
        sim_tt: Some(mean(sim_tt)),
        sim_it: Some(mean(sim_it_aug)),
        bleu: Some(tm.bleu),
        meteor: Some(tm.meteor),
        ..MetricRow::labelled(method)
    };
    Ok(EvalReport {
        task: Task::Retrieval,
        method: method.to_string(),
        examples: queries.len(),
        delta: augmented_row.minus(&original, "delta"),
        original,
        augmented: augmented_row,
        mean_insertions: Some(tm.mean_insertions),
        std_insertions: Some(tm.std_insertions),
        axiom_violation_rate: axiom_violation_rate(&orig_run, &aug_run)?,
        reference: published_reference(Task::Retrieval),
    })
}

/// Share of entailment-gold examples predicted non-contradiction on the
/// original text and contradiction on the augmented text. Zero when no gold
/// label is entailment.
pub fn contradiction_flip_rate(gold: &[Label], original: &[Label], augmented: &[Label]) -> f64 {
    let mut total = 0usize;
    let mut flipped = 0usize;
    for ((g, o), a) in gold.iter().zip(original).zip(augmented) {
        if *g == Label::Entailment {
            total += 1;
            if *o != Label::Contradiction && *a == Label::Contradiction {
                flipped += 1;
            }
        }
    }
    if total == 0 { 0.0 } else { flipped as f64 / total as f64 }
}

/// Entailment predictions before and after augmentation. Labels are aligned
/// by position. When `texts` is given (corpus in the same order plus the
/// augmented texts) the text-overlap columns are filled, and with `encoders`
/// also the embedding similarities.
pub fn evaluate_entailment(
    gold: &[Label],
    predicted_original: &[Label],
    predicted_augmented: &[Label],
    texts: Option<(&[Example], &BTreeMap<String, String>)>,
    encoders: Option<(&dyn TextEmbedder, &dyn ImageEmbedder)>,
    method: &str,
) -> Result<EvalReport> {
    if predicted_original.len() != gold.len() || predicted_augmented.len() != gold.len() {
        return Err(Error::Invalid(format!(
            "label counts differ: gold {}, original {}, augmented {}",
            gold.len(),
            predicted_original.len(),
            predicted_augmented.len()
        )));
    }
    let before = classification_report(gold, predicted_original)?;
    let after = classification_report(gold, predicted_augmented)?;
    let mut original = MetricRow {
        accuracy: Some(before.accuracy),
        precision: Some(before.precision),
        recall: Some(before.recall),
        f1: Some(before.f1),
        ..MetricRow::labelled("original")
    };
    let mut augmented_row = MetricRow {
        accuracy: Some(after.accuracy),
        precision: Some(after.precision),
        recall: Some(after.recall),
        f1: Some(after.f1),
        ..MetricRow::labelled(method)
    };
    let mut insertions = (None, None);

    if let Some((corpus, augmented)) = texts {
        if corpus.len() != gold.len() {
            return Err(Error::Invalid(format!("{} examples vs {} labels", corpus.len(), gold.len())));
        }
        let refs: Vec<&Example> = corpus.iter().collect();
        let aug_texts = augmented_for(&refs, augmented)?;
        let pairs: Vec<(&str, &str)> = corpus.iter().zip(&aug_texts).map(|(ex, a)| (ex.text.as_str(), *a)).collect();
        let tm = text_metrics(&pairs);
        original.bleu = Some(tm.bleu_original);
        original.meteor = Some(tm.meteor_original);
        augmented_row.bleu = Some(tm.bleu);
        augmented_row.meteor = Some(tm.meteor);
        insertions = (Some(tm.mean_insertions), Some(tm.std_insertions));

        if let Some((text, image)) = encoders {
            let (mut tt, mut it_o, mut it_a) = (Vec::new(), Vec::new(), Vec::new());
            for (ex, aug) in corpus.iter().zip(&aug_texts) {
                let e_o = text.embed_text(&ex.text)?;
                let e_a = text.embed_text(aug)?;
                let img = image.embed_image(&ex.image_id)?;
                tt.push(cosine(&e_o, &e_a)?);
                it_o.push(cosine(&e_o, &img)?);
                it_a.push(cosine(&e_a, &img)?);
            }
            original.sim_tt = Some(1.0);
            original.sim_it = Some(mean(it_o));
            augmented_row.sim_tt = Some(mean(tt));
            augmented_row.sim_it = Some(mean(it_a));
        }
    }

    Ok(EvalReport {
        task: Task::Entailment,
        method: method.to_string(),
        examples: gold.len(),
        delta: augmented_row.minus(&original, "delta"),
        original,
        augmented: augmented_row,
        mean_insertions: insertions.0,
        std_insertions: insertions.1,
        axiom_violation_rate: contradiction_flip_rate(gold, predicted_original, predicted_augmented),
        reference: published_reference(Task::Entailment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::fixture::{FixtureImageEmbedder, FixtureTextEmbedder};
    use crate::providers::WordEmbeddingTable;
    use std::collections::HashMap;
    use std::sync::Arc;
    use Label::*;

    fn ex(id: &str, text: &str, image: &str) -> Example {
        Example { id: id.into(), text: text.into(), image_id: image.into(), gold_label: None }
    }

    fn encoders() -> (FixtureTextEmbedder, FixtureImageEmbedder) {
        let mut t = WordEmbeddingTable::new();
        t.insert("dog", vec![1.0, 0.0]).unwrap();
        t.insert("cat", vec![0.0, 1.0]).unwrap();
        t.insert("fluffy", vec![0.2, 1.0]).unwrap();
        t.insert("wet", vec![-1.0, 0.0]).unwrap();
        let images = HashMap::from([
            ("d".to_string(), vec![1.0, 0.0]),
            ("c".to_string(), vec![0.0, 1.0]),
        ]);
        (FixtureTextEmbedder::new(Arc::new(t)), FixtureImageEmbedder::new(images).unwrap())
    }

    #[test]
    fn flip_rate() {
        let gold = [Entailment, Entailment, Neutral, Entailment];
        let orig = [Entailment, Contradiction, Neutral, Neutral];
        let aug = [Contradiction, Contradiction, Contradiction, Neutral];
        assert!((contradiction_flip_rate(&gold, &orig, &aug) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(contradiction_flip_rate(&[Neutral], &[Neutral], &[Contradiction]), 0.0);
    }

    #[test]
    fn retrieval_report() {
        let corpus = vec![ex("1", "a dog", "d"), ex("2", "a cat", "c")];
        let augmented = BTreeMap::from([
            ("1".to_string(), "a wet dog".to_string()),
            ("2".to_string(), "a fluffy cat".to_string()),
        ]);
        let (t, i) = encoders();
        let r = evaluate_retrieval(&corpus, &augmented, &t, &i, None, "xmai").unwrap();
        assert_eq!(r.examples, 2);
        assert_eq!(r.original.mrr, Some(1.0));
        // "a wet dog" embeds to the zero vector: every image ties, "c" ranks first.
        assert_eq!(r.augmented.mrr, Some(0.75));
        assert_eq!(r.axiom_violation_rate, 0.5);
        assert_eq!(r.mean_insertions, Some(1.0));
        assert_eq!(r.original.bleu, Some(1.0));
        assert!(r.augmented.bleu.unwrap() < 1.0);
    }

    #[test]
    fn retrieval_gallery_cap_and_missing() {
        let corpus = vec![ex("1", "a dog", "d"), ex("2", "a cat", "c")];
        let augmented = BTreeMap::from([("2".to_string(), "a cat".to_string())]);
        let (t, i) = encoders();
        // only image "c" survives the cap, so only query 2 runs
        let r = evaluate_retrieval(&corpus, &augmented, &t, &i, Some(1), "x").unwrap();
        assert_eq!(r.examples, 1);
        let err = evaluate_retrieval(&corpus, &augmented, &t, &i, None, "x").unwrap_err();
        assert!(err.to_string().contains("1"));
        let corpus = vec![ex("1", "a dog", "zz")];
        let augmented = BTreeMap::from([("1".to_string(), "a dog".to_string())]);
        let err = evaluate_retrieval(&corpus, &augmented, &t, &i, None, "x").unwrap_err();
        assert!(err.to_string().contains("zz"), "{err}");
    }

    #[test]
    fn entailment_report() {
        let gold = [Entailment, Entailment, Contradiction];
        let r = evaluate_entailment(&gold, &gold, &[Entailment, Contradiction, Contradiction], None, None, "xmai").unwrap();
        assert_eq!(r.original.accuracy, Some(1.0));
        assert!((r.augmented.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.delta.accuracy.unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.axiom_violation_rate, 0.5);
        assert!(r.augmented.bleu.is_none());
        assert!(evaluate_entailment(&gold, &gold[..2], &gold, None, None, "x").is_err());
    }

    #[test]
    fn entailment_with_texts() {
        let corpus = vec![ex("1", "a dog", "d")];
        let augmented = BTreeMap::from([("1".to_string(), "a wet dog".to_string())]);
        let (t, i) = encoders();
        let r = evaluate_entailment(&[Entailment], &[Entailment], &[Neutral], Some((&corpus, &augmented)), Some((&t, &i)), "x").unwrap();
        assert_eq!(r.mean_insertions, Some(1.0));
        assert_eq!(r.original.sim_it, Some(1.0));
        assert_eq!(r.augmented.sim_tt, Some(0.0));
    }

    #[test]
    fn text_metric_means() {
        let m = text_metrics(&[("a b c d", "a b c d"), ("a b c d", "a b c d e")]);
        assert!((m.bleu - (1.0 + 0.668740304976422) / 2.0).abs() < 1e-12);
        assert_eq!(m.bleu_original, 1.0);
        assert_eq!(m.mean_insertions, 0.5);
    }
}
