//! Classification metrics: accuracy, per-class precision/recall/F1, and
//! macro / support-weighted F1 averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    /// confusion[i][j] counts examples of true class i predicted as class j.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Metrics from a confusion matrix whose rows are true classes and whose
/// columns are predicted classes.
pub fn from_confusion(confusion: Vec<Vec<usize>>, class_names: &[String]) -> Result<MetricsReport> {
    let k = confusion.len();
    if k == 0 {
        return Err(Error::Metrics("empty confusion matrix".into()));
    }
    if confusion.iter().any(|row| row.len() != k) {
        return Err(Error::Metrics("confusion matrix must be square".into()));
    }
    if class_names.len() != k {
        return Err(Error::Metrics(format!(
            "{} class names for a {k}x{k} confusion matrix",
            class_names.len()
        )));
    }
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Metrics("confusion matrix has no observations".into()));
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let mut per_class = Vec::with_capacity(k);
    let mut f1_sum = 0.0;
    let mut f1_weighted_sum = 0.0;
    for i in 0..k {
        let tp = confusion[i][i] as f64;
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = (0..k).map(|r| confusion[r][i]).sum();
        let precision = safe_div(tp, predicted as f64);
        let recall = safe_div(tp, support as f64);
        let f1 = safe_div(2.0 * precision * recall, precision + recall);
        f1_sum += f1;
        f1_weighted_sum += f1 * support as f64;
        per_class.push(ClassMetrics {
            label: class_names[i].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / total as f64,
        f1_macro: f1_sum / k as f64,
        f1_weighted: f1_weighted_sum / total as f64,
        confusion,
        per_class,
    })
}

/// Metrics from parallel label/prediction slices with classes 0..n_classes.
pub fn evaluate(
    labels: &[usize],
    predictions: &[usize],
    class_names: &[String],
) -> Result<MetricsReport> {
    if labels.len() != predictions.len() {
        return Err(Error::Metrics(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Metrics("no examples to evaluate".into()));
    }
    let k = class_names.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y >= k || p >= k {
            return Err(Error::Metrics(format!(
                "class index out of range: true {y}, predicted {p}, {k} classes"
            )));
        }
        confusion[y][p] += 1;
    }
    from_confusion(confusion, class_names)
}
