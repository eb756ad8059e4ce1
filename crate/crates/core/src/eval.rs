//! Classification metrics: per-class scores, support-weighted F1,
//! rejection curves and bootstrap intervals.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::derive_seed;
use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::types::{Prediction, SemanticType, NUM_TYPES};

/// Confusion-matrix column collecting abstentions and rejections.
pub const NON_CLASS_COLUMN: usize = NUM_TYPES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    #[serde(rename = "type")]
    pub semantic_type: SemanticType,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_samples: usize,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub non_class_predictions: u64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true types, columns predicted types plus a final non-class
    /// column.
    pub confusion: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_per_sample_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_size_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bootstrap: Option<BootstrapInterval>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn confusion_matrix(predictions: &[Prediction], truths: &[SemanticType]) -> Result<Vec<Vec<u64>>> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut confusion = vec![vec![0u64; NUM_TYPES + 1]; NUM_TYPES];
    for (p, t) in predictions.iter().zip(truths) {
        let col = p.semantic_type().map_or(NON_CLASS_COLUMN, SemanticType::index);
        confusion[t.index()][col] += 1;
    }
    Ok(confusion)
}

pub fn evaluate(predictions: &[Prediction], truths: &[SemanticType]) -> Result<EvaluationReport> {
    let confusion = confusion_matrix(predictions, truths)?;
    let n = truths.len();
    let mut per_class = Vec::with_capacity(NUM_TYPES);
    let mut weighted = 0.0;
    let mut correct = 0u64;
    for c in 0..NUM_TYPES {
        let tp = confusion[c][c] as f64;
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted as f64);
        let recall = ratio(tp, support as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        weighted += support as f64 * f1;
        correct += confusion[c][c];
        per_class.push(ClassMetrics {
            semantic_type: SemanticType::from_index(c).expect("index within vocabulary"),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(EvaluationReport {
        n_samples: n,
        weighted_f1: weighted / n as f64,
        accuracy: correct as f64 / n as f64,
        non_class_predictions: confusion.iter().map(|row| row[NON_CLASS_COLUMN]).sum(),
        per_class,
        confusion,
        runtime_per_sample_secs: None,
        model_size_bytes: None,
        bootstrap: None,
    })
}

/// Support-weighted F1 alone, skipping report allocation.
pub fn weighted_f1(predictions: &[Prediction], truths: &[SemanticType]) -> Result<f64> {
    evaluate(predictions, truths).map(|r| r.weighted_f1)
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Weighted F1 against the fraction of highest-confidence samples kept,
/// listed in decreasing order of retained fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub points: Vec<RejectionPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionPoint {
    pub retained_fraction: f64,
    pub retained: usize,
    pub weighted_f1: f64,
}

impl RejectionCurve {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["retained_fraction", "retained", "weighted_f1"])?;
        for p in &self.points {
            out.write_record([p.retained_fraction.to_string(), p.retained.to_string(), p.weighted_f1.to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<rejection curve>", e))?;
        Ok(())
    }
}

/// Sample order by descending top probability; the sort is stable so equal
/// confidences keep input order.
fn confidence_order(probabilities: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = probabilities
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order
}

fn check_probabilities(probabilities: &[Vec<f64>], truths: &[SemanticType]) -> Result<()> {
    if probabilities.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: probabilities.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    if let Some(row) = probabilities.iter().find(|r| r.len() != NUM_TYPES) {
        return Err(Error::DimensionMismatch {
            expected: NUM_TYPES,
            found: row.len(),
        });
    }
    Ok(())
}

fn f1_of_subset(probabilities: &[Vec<f64>], truths: &[SemanticType], subset: &[(usize, f64)]) -> Result<f64> {
    let preds: Vec<Prediction> = subset
        .iter()
        .map(|&(i, _)| Prediction::Type(SemanticType::from_index(argmax(&probabilities[i])).expect("row width checked")))
        .collect();
    let t: Vec<SemanticType> = subset.iter().map(|&(i, _)| truths[i]).collect();
    weighted_f1(&preds, &t)
}

/// Keeps the top `ceil(f * n)` samples by confidence for each fraction `f`
/// in (0, 1].
pub fn rejection_curve(probabilities: &[Vec<f64>], truths: &[SemanticType], fractions: &[f64]) -> Result<RejectionCurve> {
    check_probabilities(probabilities, truths)?;
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("no retention fractions given".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("retention fraction {f} outside (0, 1]")));
    }
    let mut fractions = fractions.to_vec();
    fractions.sort_by(|a, b| b.total_cmp(a));
    fractions.dedup();
    let order = confidence_order(probabilities);
    let n = truths.len();
    let points = fractions
        .into_iter()
        .map(|f| {
            // Guard against products such as 0.7 * 10 = 7.000000000000001.
            let k = ((f * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
            Ok(RejectionPoint {
                retained_fraction: f,
                retained: k,
                weighted_f1: f1_of_subset(probabilities, truths, &order[..k])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { points })
}

/// Keeps the samples whose top probability is at least each threshold.
/// Thresholds that retain nothing report F1 0.
pub fn rejection_by_threshold(
    probabilities: &[Vec<f64>],
    truths: &[SemanticType],
    thresholds: &[f64],
) -> Result<RejectionCurve> {
    check_probabilities(probabilities, truths)?;
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no thresholds given".into()));
    }
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let order = confidence_order(probabilities);
    let n = truths.len();
    let points = thresholds
        .into_iter()
        .map(|t| {
            let k = order.iter().take_while(|(_, p)| *p >= t).count();
            let weighted_f1 = if k == 0 {
                0.0
            } else {
                f1_of_subset(probabilities, truths, &order[..k])?
            };
            Ok(RejectionPoint {
                retained_fraction: k as f64 / n as f64,
                retained: k,
                weighted_f1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resamples (prediction, truth) pairs with replacement; each iteration
/// draws from its own derived seed, so results do not depend on threading.
pub fn bootstrap_f1(
    predictions: &[Prediction],
    truths: &[SemanticType],
    n_iterations: usize,
    seed: u64,
) -> Result<BootstrapInterval> {
    if n_iterations == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one iteration".into()));
    }
    confusion_matrix(predictions, truths)?;
    let n = truths.len();
    let mut scores = (0..n_iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, it as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let p: Vec<Prediction> = idx.iter().map(|&i| predictions[i]).collect();
            let t: Vec<SemanticType> = idx.iter().map(|&i| truths[i]).collect();
            weighted_f1(&p, &t)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / n_iterations as f64;
    scores.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        mean,
        lower: percentile(&scores, 0.025),
        upper: percentile(&scores, 0.975),
    })
}
