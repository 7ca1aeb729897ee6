use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::classifier::Prediction;
use crate::corpus::Label;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub theta: f64,
    /// Fraction of predictions with confidence at or above `theta`.
    pub coverage: f64,
    /// Accuracy on the covered predictions; absent when none are covered.
    pub selective_accuracy: Option<f64>,
}

/// 0.34, 0.35, ..., 0.99.
pub fn default_theta_grid() -> Vec<f64> {
    (34..=99).map(|i| i as f64 / 100.0).collect()
}

/// Coverage and selective accuracy at each confidence threshold. The grid is
/// evaluated in ascending order.
pub fn threshold_sweep<T: Scalar>(
    predictions: &[Prediction<T>],
    labels: &[Label],
    theta_grid: &[f64],
) -> Result<Vec<ThresholdPoint>, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let mut grid = theta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite theta"));
    let n = predictions.len();
    Ok(grid
        .into_iter()
        .map(|theta| {
            let (mut covered, mut correct) = (0usize, 0usize);
            for (p, &l) in predictions.iter().zip(labels) {
                if p.confidence.to_f64_lossy() >= theta {
                    covered += 1;
                    if p.label == l {
                        correct += 1;
                    }
                }
            }
            ThresholdPoint {
                theta,
                coverage: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
                selective_accuracy: (covered > 0).then(|| correct as f64 / covered as f64),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryMode {
    /// AI against human and refined together.
    #[default]
    AiVsRest,
    /// AI against human, refined rows dropped.
    AiVsHumanOnly,
}

/// Scores are P(AI); the positive class is AI.
pub fn collapse_binary<T: Scalar>(
    predictions: &[Prediction<T>],
    labels: &[Label],
    mode: BinaryMode,
) -> Result<(Vec<T>, Vec<bool>), EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let (scores, binary): (Vec<T>, Vec<bool>) = predictions
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !(mode == BinaryMode::AiVsHumanOnly && l == Label::Refined))
        .map(|(p, &l)| (p.probs[Label::Ai.index()], l == Label::Ai))
        .unzip();
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok((scores, binary))
}
