use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::cosine;

/// Ground-truth rank of one text query against an image gallery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query_id: String,
    pub gt_image_id: String,
    /// 1-based.
    pub rank: usize,
    pub gallery_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub queries: Vec<QueryRank>,
}

impl RetrievalRun {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let gallery = ranks.iter().copied().max().unwrap_or(1);
        RetrievalRun {
            queries: ranks
                .iter()
                .enumerate()
                .map(|(i, &rank)| QueryRank {
                    query_id: i.to_string(),
                    gt_image_id: String::new(),
                    rank,
                    gallery_size: gallery,
                })
                .collect(),
        }
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.queries.iter().map(|q| q.rank).collect()
    }
}

/// 1-based rank of `gt_image_id` when the gallery is sorted by descending
/// cosine to the query, ties broken by ascending image id.
pub fn rank_gallery<'a, I>(query: &[f64], gallery: I, gt_image_id: &str) -> Result<usize>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let scored: Vec<(&str, f64)> = gallery
        .into_iter()
        .map(|(id, emb)| cosine(query, emb).map(|c| (id, c)))
        .collect::<Result<_>>()?;
    let gt = scored
        .iter()
        .find(|(id, _)| *id == gt_image_id)
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::Invalid(format!("ground-truth image {gt_image_id:?} not in gallery")))?;
    let ahead = scored
        .iter()
        .filter(|(id, c)| *c > gt || (*c == gt && *id < gt_image_id))
        .count();
    Ok(ahead + 1)
}

pub fn mrr(run: &RetrievalRun) -> Result<f64> {
    if run.queries.is_empty() {
        return Err(Error::Invalid("mrr of an empty run".into()));
    }
    let sum: f64 = run.queries.iter().map(|q| 1.0 / q.rank as f64).sum();
    Ok(sum / run.queries.len() as f64)
}

/// Fraction of queries ranked strictly worse in `augmented` than in `original`.
pub fn axiom_violation_rate(original: &RetrievalRun, augmented: &RetrievalRun) -> Result<f64> {
    if original.queries.len() != augmented.queries.len() {
        return Err(Error::Invalid(format!(
            "runs differ in size: {} vs {}",
            original.queries.len(),
            augmented.queries.len()
        )));
    }
    if original.queries.is_empty() {
        return Ok(0.0);
    }
    let before: HashMap<&str, usize> = original
        .queries
        .iter()
        .map(|q| (q.query_id.as_str(), q.rank))
        .collect();
    let mut worse = 0;
    for q in &augmented.queries {
        let prior = before
            .get(q.query_id.as_str())
            .ok_or_else(|| Error::Invalid(format!("query {:?} missing from original run", q.query_id)))?;
        if q.rank > *prior {
            worse += 1;
        }
    }
    Ok(worse as f64 / augmented.queries.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        let q = [1.0, 0.0, 0.0];
        let gt = [1.0, 0.0, 0.0];
        let o1 = [0.0, 1.0, 0.0];
        let o2 = [0.0, 0.0, 1.0];
        let g: Vec<(&str, &[f64])> = vec![("b", &o1), ("a", &gt), ("c", &o2)];
        assert_eq!(rank_gallery(&q, g, "a").unwrap(), 1);
        assert_eq!(rank_gallery(&q, vec![("only", &gt[..])], "only").unwrap(), 1);
    }

    #[test]
    fn ties_break_by_id() {
        let q = [1.0, 0.0];
        let hi = [0.9, (1.0f64 - 0.81).sqrt()];
        let lo = [0.1, (1.0f64 - 0.01).sqrt()];
        let g: Vec<(&str, &[f64])> = vec![("img2", &hi), ("img1", &hi), ("img3", &lo)];
        assert_eq!(rank_gallery(&q, g.clone(), "img2").unwrap(), 2);
        assert_eq!(rank_gallery(&q, g.clone(), "img1").unwrap(), 1);
        assert_eq!(rank_gallery(&q, g, "img3").unwrap(), 3);
    }

    #[test]
    fn missing_gt_is_error() {
        let e = [1.0];
        assert!(rank_gallery(&e, vec![("a", &e[..])], "z").is_err());
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(mrr(&RetrievalRun::from_ranks(&[1, 1, 1])).unwrap(), 1.0);
        let v = mrr(&RetrievalRun::from_ranks(&[1, 2, 4])).unwrap();
        assert!((v - 0.58333333333).abs() < 1e-9);
        assert!((mrr(&RetrievalRun::from_ranks(&[10])).unwrap() - 0.1).abs() < 1e-15);
        assert!(mrr(&RetrievalRun::default()).is_err());
    }

    #[test]
    fn violation_rate() {
        let a = RetrievalRun::from_ranks(&[1, 2, 3, 4]);
        assert_eq!(axiom_violation_rate(&a, &a).unwrap(), 0.0);
        assert_eq!(axiom_violation_rate(&a, &RetrievalRun::from_ranks(&[2, 3, 4, 5])).unwrap(), 1.0);
        assert_eq!(axiom_violation_rate(&a, &RetrievalRun::from_ranks(&[1, 2, 4, 1])).unwrap(), 0.25);
        assert!(axiom_violation_rate(&a, &RetrievalRun::from_ranks(&[1])).is_err());
        let mut renamed = a.clone();
        renamed.queries[0].query_id = "other".into();
        assert!(axiom_violation_rate(&a, &renamed).is_err());
    }
}
