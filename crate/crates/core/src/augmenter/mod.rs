//! Cross-modal attribute insertion.
//!
//! For one image-text pair the augmenter
//!
//! 1. places mask sites before mentions of detected objects (exact label
//!    matches, or similar nouns when the text has no exact match),
//! 2. fills the sites left to right, each time asking the mask filler for the
//!    top-k words on the text as augmented so far,
//! 3. filters and scores the candidates by mask-fill probability `p`,
//!    similarity to the detected attribute `s` and cross-modal distance
//!    between the candidate text and the image `d`, each normalized over the
//!    surviving candidates, and
//! 4. inserts the candidate maximizing `λ1·p + λ2·s + λ3·d`.

mod scoring;
mod sites;
pub mod stopwords;

pub use scoring::{
    attribute_similarity, cross_modal_distance, filter_candidates, normalize, score,
    select_insertion, NEIGHBORHOOD,
};
pub use sites::{direct_sites, fallback_sites, find_mask_sites, MaskPlan};

use crate::model::{
    tokenize, AugmentationConfig, AugmentationResult, CandidateInsertion, Decision, Detection,
    Example, TokenKind, TokenStream,
};
use crate::providers::{check_candidates, MaskFillQuery, ProviderError, Providers};

/// Builds the mask plan for `tokens`, calling the tagger only when the text
/// has no direct object match.
pub fn plan_masks(
    tokens: &TokenStream,
    detections: &[Detection],
    providers: &Providers,
    threshold: f64,
) -> Result<MaskPlan, ProviderError> {
    let direct = direct_sites(tokens, detections);
    if !direct.is_empty() || detections.is_empty() {
        return Ok(MaskPlan {
            tokens: tokens.clone(),
            sites: direct,
            fallback_used: false,
        });
    }
    let tags = providers.pos_tagger.tag(&tokens.word_lowers())?;
    let sites = fallback_sites(tokens, &tags, detections, &providers.match_table, threshold);
    Ok(MaskPlan {
        tokens: tokens.clone(),
        fallback_used: !sites.is_empty(),
        sites,
    })
}

/// Lowercase, with the first letter capitalized at a sentence start.
fn cased(word: &str, sentence_start: bool) -> String {
    let lower = word.to_lowercase();
    if !sentence_start {
        return lower;
    }
    let mut chars = lower.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => lower,
    }
}

/// Runs the full insertion pipeline on one example.
pub fn augment_example(
    example: &Example,
    detections: &[Detection],
    providers: &Providers,
    config: &AugmentationConfig,
) -> Result<AugmentationResult, ProviderError> {
    let original = tokenize(&example.text);
    let plan = plan_masks(&original, detections, providers, config.threshold)?;
    let mut result = AugmentationResult::unchanged(example);
    result.fallback_used = plan.fallback_used;
    if plan.sites.is_empty() {
        return Ok(result);
    }

    let image = providers.image_embedder.embed_image(&example.image_id)?;
    let stopwords = stopwords::english_stopwords();
    let lambdas = config.lambdas();
    let mut current = original;
    let mut inserted = 0;

    for site in plan.sites {
        let mask_index = site.insert_before_index + inserted;
        let query = MaskFillQuery::at(&current, mask_index, config.k);
        let raw = providers.mask_filler.mask_fill(&query)?;
        check_candidates(&raw, config.k)?;
        let (survivors, filtered) = filter_candidates(&raw, &current, mask_index, stopwords);

        let mut decision = Decision {
            site,
            mask_index,
            chosen: None,
            rejected: Vec::new(),
            filtered,
            dropped_reason: None,
        };
        if survivors.is_empty() {
            decision.dropped_reason = Some(if raw.is_empty() {
                "no candidates".to_string()
            } else {
                "all candidates filtered".to_string()
            });
            result.decisions.push(decision);
            continue;
        }

        let sentence_start = current.is_sentence_start(mask_index);
        let forms: Vec<String> = survivors.iter().map(|c| cased(&c.word, sentence_start)).collect();

        let probabilities: Vec<f64> = survivors.iter().map(|c| c.probability).collect();
        let similarities: Vec<Option<f64>> = forms
            .iter()
            .map(|w| attribute_similarity(&providers.attribute_table, w, &decision.site.attribute_phrase))
            .collect();
        let mut distances = Vec::with_capacity(forms.len());
        for form in &forms {
            let text = current.with_inserted(mask_index, form, TokenKind::Word).render();
            distances.push(cross_modal_distance(
                providers.text_embedder.as_ref(),
                &text,
                &image,
            )?);
        }

        let invalid = |e: crate::Error| ProviderError::Malformed(e.to_string());
        let p = normalize(&probabilities).map_err(invalid)?;
        let s = if similarities.iter().all(Option::is_some) {
            let raw: Vec<f64> = similarities.iter().map(|v| v.unwrap_or(0.0)).collect();
            normalize(&raw).map_err(invalid)?
        } else {
            vec![1.0 / forms.len() as f64; forms.len()]
        };
        let d = normalize(&distances).map_err(invalid)?;
        let choice = select_insertion(&p, &s, &d, lambdas).expect("survivors are nonempty");

        for (i, form) in forms.into_iter().enumerate() {
            let candidate = CandidateInsertion {
                word: form,
                probability: probabilities[i],
                similarity: similarities[i],
                distance: distances[i],
                p: p[i],
                s: s[i],
                d: d[i],
                score: score(p[i], s[i], d[i], lambdas),
            };
            if i == choice {
                decision.chosen = Some(candidate);
            } else {
                decision.rejected.push(candidate);
            }
        }
        let word = &decision.chosen.as_ref().expect("chosen set above").word;
        current = current.with_inserted(mask_index, word, TokenKind::Word);
        inserted += 1;
        result.decisions.push(decision);
    }

    result.augmented_text = current.render();
    Ok(result)
}
