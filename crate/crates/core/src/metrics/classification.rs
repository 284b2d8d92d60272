use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy plus precision, recall and F1 averaged over classes with weights
/// proportional to gold support. Undefined per-class ratios count as 0.
pub fn classification_report(gold: &[Label], predicted: &[Label]) -> Result<ClassificationReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Invalid(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Invalid("no labels".into()));
    }
    let n = gold.len() as f64;
    let correct = gold.iter().zip(predicted).filter(|(g, p)| g == p).count();

    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for class in Label::ALL {
        let support = gold.iter().filter(|&&g| g == class).count();
        if support == 0 {
            continue;
        }
        let predicted_as = predicted.iter().filter(|&&p| p == class).count();
        let tp = gold
            .iter()
            .zip(predicted)
            .filter(|(g, p)| **g == class && **p == class)
            .count();
        let p = if predicted_as == 0 { 0.0 } else { tp as f64 / predicted_as as f64 };
        let r = tp as f64 / support as f64;
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = support as f64 / n;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
    }
    Ok(ClassificationReport {
        accuracy: correct as f64 / n,
        precision,
        recall,
        f1,
    })
}
