use std::collections::BTreeMap;

use crate::model::{tokenize, Detection, MaskSite, MatchKind, TokenStream};
use crate::providers::{cosine, PosTag, WordEmbeddingTable};

/// Where masks go for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub tokens: TokenStream,
    /// Strictly increasing by `insert_before_index`.
    pub sites: Vec<MaskSite>,
    pub fallback_used: bool,
}

/// Sites before every occurrence of every detected object label. Multi-word
/// labels match contiguous word runs; the first detection claiming an index
/// keeps it.
pub fn direct_sites(tokens: &TokenStream, detections: &[Detection]) -> Vec<MaskSite> {
    let toks = tokens.tokens();
    let mut sites: BTreeMap<usize, MaskSite> = BTreeMap::new();
    for det in detections {
        let label = tokenize(&det.object_label).word_lowers();
        if label.is_empty() || label.len() > toks.len() {
            continue;
        }
        for start in 0..=(toks.len() - label.len()) {
            let run = &toks[start..start + label.len()];
            let hit = run
                .iter()
                .zip(&label)
                .all(|(t, w)| t.is_word() && t.lower == *w);
            if hit {
                sites.entry(start).or_insert_with(|| MaskSite {
                    insert_before_index: start,
                    object_label: det.object_label.clone(),
                    attribute_phrase: det.attribute_phrase.clone(),
                    match_kind: MatchKind::Direct,
                    match_similarity: 1.0,
                });
            }
        }
    }
    sites.into_values().collect()
}

/// Sites before nouns whose embedding is within `threshold` cosine of some
/// detected object label. `tags` holds one tag per word token. Each noun is
/// bound to its best-matching detection, earliest on ties.
pub fn fallback_sites(
    tokens: &TokenStream,
    tags: &[PosTag],
    detections: &[Detection],
    match_table: &WordEmbeddingTable,
    threshold: f64,
) -> Vec<MaskSite> {
    let labels: Vec<(&Detection, Vec<f64>)> = detections
        .iter()
        .filter_map(|d| match_table.phrase_vector(&d.object_label).map(|v| (d, v)))
        .collect();
    let mut sites = Vec::new();
    for (index, tag) in tokens.word_indices().into_iter().zip(tags) {
        if *tag != PosTag::Noun {
            continue;
        }
        let Some(noun) = match_table.get(&tokens.tokens()[index].lower) else {
            continue;
        };
        let mut best: Option<(&Detection, f64)> = None;
        for (det, label_vec) in &labels {
            let Ok(sim) = cosine(noun, label_vec) else {
                continue;
            };
            if best.map_or(true, |(_, b)| sim > b) {
                best = Some((det, sim));
            }
        }
        if let Some((det, sim)) = best {
            if sim >= threshold {
                sites.push(MaskSite {
                    insert_before_index: index,
                    object_label: det.object_label.clone(),
                    attribute_phrase: det.attribute_phrase.clone(),
                    match_kind: MatchKind::NounFallback,
                    match_similarity: sim.clamp(0.0, 1.0),
                });
            }
        }
    }
    sites
}

/// Direct matches first; nouns are compared to objects only when the text has
/// no direct match at all.
pub fn find_mask_sites(
    tokens: &TokenStream,
    tags: &[PosTag],
    detections: &[Detection],
    match_table: &WordEmbeddingTable,
    threshold: f64,
) -> MaskPlan {
    let direct = direct_sites(tokens, detections);
    if !direct.is_empty() {
        return MaskPlan {
            tokens: tokens.clone(),
            sites: direct,
            fallback_used: false,
        };
    }
    let sites = fallback_sites(tokens, tags, detections, match_table, threshold);
    MaskPlan {
        tokens: tokens.clone(),
        fallback_used: !sites.is_empty(),
        sites,
    }
}
