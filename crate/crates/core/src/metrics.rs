//! Per-class precision, recall and F-score from paired labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: usize,
    pub predicted: usize,
    /// Set when no example was predicted as this class; precision is 0.
    pub zero_division: bool,
}

/// Metrics for each class in `classes`, in that order, from
/// `(truth, prediction)` pairs.
pub fn per_class<C: PartialEq + Copy>(pairs: &[(C, C)], classes: &[C]) -> Result<Vec<ClassMetrics>> {
    if pairs.is_empty() {
        return Err(Error::Data("no examples to evaluate".into()));
    }
    Ok(classes
        .iter()
        .map(|&c| {
            let tp = pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
            let predicted = pairs.iter().filter(|(_, p)| *p == c).count();
            let support = pairs.iter().filter(|(t, _)| *t == c).count();
            let zero_division = predicted == 0;
            let precision = if zero_division { 0.0 } else { tp as f64 / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
            let f_score = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f_score,
                support,
                predicted,
                zero_division,
            }
        })
        .collect())
}

pub fn accuracy<C: PartialEq>(pairs: &[(C, C)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64
}
