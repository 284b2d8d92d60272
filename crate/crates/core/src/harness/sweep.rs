use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::evaluate_retrieval;
use super::report::EvalReport;
use super::{augment_corpus, AugmentSummary, Method, ProviderSet};
use crate::io::Detections;
use crate::model::{AugmentationConfig, Example};

/// Values to try per hyper-parameter. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub k: Vec<usize>,
    pub threshold: Vec<f64>,
}

fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() { vec![base] } else { values.to_vec() }
}

impl SweepGrid {
    /// Cartesian product with `threshold` varying fastest.
    pub fn points(&self, base: &AugmentationConfig) -> Vec<AugmentationConfig> {
        let mut out = Vec::new();
        for l1 in axis(&self.lambda1, base.lambda1) {
            for l2 in axis(&self.lambda2, base.lambda2) {
                for l3 in axis(&self.lambda3, base.lambda3) {
                    for k in axis(&self.k, base.k) {
                        for threshold in axis(&self.threshold, base.threshold) {
                            out.push(AugmentationConfig {
                                lambda1: l1,
                                lambda2: l2,
                                lambda3: l3,
                                k,
                                threshold,
                                ..*base
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub config: AugmentationConfig,
    pub summary: Option<AugmentSummary>,
    pub report: Option<EvalReport>,
    pub seconds_per_example: f64,
    pub error: Option<String>,
}

/// Runs augmentation (and retrieval evaluation when `evaluate` is set) at
/// every grid point. A failing point is recorded and the sweep moves on.
pub fn run_sweep(
    corpus: &[Example],
    detections: &Detections,
    providers: &ProviderSet,
    base: &AugmentationConfig,
    grid: &SweepGrid,
    workers: usize,
    evaluate: bool,
) -> Vec<SweepPoint> {
    let encoders = if evaluate { Some(providers.encoders()) } else { None };
    grid.points(base)
        .into_iter()
        .enumerate()
        .map(|(index, config)| {
            let start = Instant::now();
            let mut point = SweepPoint {
                index,
                config,
                summary: None,
                report: None,
                seconds_per_example: 0.0,
                error: None,
            };
            let run = match augment_corpus(corpus, detections, providers, &Method::Xmai, &config, workers) {
                Ok(run) => run,
                Err(e) => {
                    log::warn!("sweep point {index}: {e}");
                    point.error = Some(e.to_string());
                    return point;
                }
            };
            point.seconds_per_example = start.elapsed().as_secs_f64() / corpus.len().max(1) as f64;
            log::info!("sweep point {index}: {:.6} s/example", point.seconds_per_example);
            match &encoders {
                Some(Ok((text, image))) => {
                    match evaluate_retrieval(corpus, &run.augmented_texts(), text.as_ref(), image.as_ref(), config.max_gallery, "xmai") {
                        Ok(report) => point.report = Some(report),
                        Err(e) => point.error = Some(e.to_string()),
                    }
                }
                Some(Err(e)) => point.error = Some(e.to_string()),
                None => {}
            }
            point.summary = Some(run.summary);
            point
        })
        .collect()
}

/// Long format, one metric per line:
/// `point lambda1 lambda2 lambda3 k threshold metric value`.
pub fn sweep_tsv(points: &[SweepPoint]) -> String {
    let mut out = String::from("point\tlambda1\tlambda2\tlambda3\tk\tthreshold\tmetric\tvalue\n");
    for p in points {
        let c = &p.config;
        let mut metrics: Vec<(&str, f64)> = Vec::new();
        if let Some(s) = &p.summary {
            metrics.extend([
                ("modified", s.modified as f64),
                ("failures", s.failures as f64),
                ("sites", s.sites as f64),
                ("fallback_sites", s.fallback_sites as f64),
                ("dropped_sites", s.dropped_sites as f64),
                ("mean_insertions", s.mean_insertions),
                ("std_insertions", s.std_insertions),
            ]);
        }
        if let Some(r) = &p.report {
            let a = &r.augmented;
            for (name, v) in [
                ("mrr", a.mrr),
                ("mrr_original", r.original.mrr),
                ("sim_tt", a.sim_tt),
                ("sim_it", a.sim_it),
                ("bleu", a.bleu),
                ("meteor", a.meteor),
            ] {
                if let Some(v) = v {
                    metrics.push((name, v));
                }
            }
            metrics.push(("axiom_violation_rate", r.axiom_violation_rate));
        }
        if p.error.is_some() {
            metrics.push(("error", 1.0));
        }
        for (name, value) in metrics {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                p.index, c.lambda1, c.lambda2, c.lambda3, c.k, c.threshold, name, value
            ));
        }
    }
    out
}
