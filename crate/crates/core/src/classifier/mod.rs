//! Gradient-boosted decision trees for the three-way authorship decision:
//! training, prediction, persistence and cross-validated search.

mod model;
mod search;
mod tree;

pub use model::{load_model, save_model, train, train_rows, train_with_history, GbdtModel, MODEL_FORMAT_VERSION};
pub use search::{cv_search, cv_search_rows, HyperparamRanges, SearchResult, SearchSpace, TrialResult, CV_FOLDS};
pub use tree::{Node, Tree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("{0}")]
    Data(String),
    #[error("row {row}: feature {feature} is not finite")]
    NonFinite { row: usize, feature: usize },
    #[error("feature mask {got:?} does not match the model's {expected:?}")]
    MaskMismatch { expected: Vec<bool>, got: Vec<bool> },
    #[error("model file: {0}")]
    Format(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtHyperparams {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub num_leaves: usize,
    pub subsample: f64,
    pub feature_subsample: f64,
    pub min_samples_leaf: usize,
    pub min_split_gain: f64,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
    /// Per-class multipliers on gradient and hessian; `None` means equal.
    pub class_weights: Option<[f64; 3]>,
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        Self {
            num_rounds: 100,
            learning_rate: 0.1,
            max_depth: 7,
            num_leaves: 15,
            subsample: 0.6,
            feature_subsample: 1.0,
            min_samples_leaf: 30,
            min_split_gain: 0.2,
            l1: 1.0,
            l2: 1.0,
            seed: 0,
            class_weights: None,
        }
    }
}

impl GbdtHyperparams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::Hyperparams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return bad(format!("max_depth {} outside 1..=30", self.max_depth));
        }
        if self.num_leaves < 2 || self.num_leaves > 1usize << self.max_depth {
            return bad(format!(
                "num_leaves {} must be in 2..=2^max_depth ({})",
                self.num_leaves,
                1usize << self.max_depth
            ));
        }
        for (name, v) in [
            ("subsample", self.subsample),
            ("feature_subsample", self.feature_subsample),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} outside (0, 1]"));
            }
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        for (name, v) in [
            ("min_split_gain", self.min_split_gain),
            ("l1", self.l1),
            ("l2", self.l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be non-negative"));
            }
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad(format!("class_weights {w:?} must be positive"));
            }
        }
        Ok(())
    }
}

/// Class probabilities with the argmax label (ties to the lowest class index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T> {
    pub probs: [T; 3],
    pub label: Label,
    pub confidence: T,
}

impl<T: Scalar> Prediction<T> {
    pub fn from_probs(probs: [T; 3]) -> Self {
        let mut best = 0;
        for c in 1..3 {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        Self {
            probs,
            label: Label::from_index(best).expect("three classes"),
            confidence: probs[best],
        }
    }

    /// Softmax of raw class scores.
    pub fn from_scores(scores: [T; 3]) -> Self {
        let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let e = scores.map(|s| (s - m).exp());
        let z = e[0] + e[1] + e[2];
        Self::from_probs(e.map(|v| v / z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let hp = GbdtHyperparams::default();
        hp.validate().unwrap();
        assert_eq!(
            (hp.num_rounds, hp.max_depth, hp.num_leaves, hp.min_samples_leaf),
            (100, 7, 15, 30)
        );
        assert_eq!((hp.learning_rate, hp.subsample, hp.feature_subsample), (0.1, 0.6, 1.0));
        assert_eq!((hp.min_split_gain, hp.l1, hp.l2), (0.2, 1.0, 1.0));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let cases = [
            GbdtHyperparams {
                num_leaves: 9,
                max_depth: 3,
                ..Default::default()
            },
            GbdtHyperparams {
                subsample: 0.0,
                ..Default::default()
            },
            GbdtHyperparams {
                learning_rate: -0.1,
                ..Default::default()
            },
            GbdtHyperparams {
                l2: -1.0,
                ..Default::default()
            },
        ];
        for hp in cases {
            assert!(hp.validate().is_err(), "{hp:?}");
        }
    }

    #[test]
    fn prediction_ties_go_to_lowest_class() {
        let p = Prediction::from_probs([0.4, 0.4, 0.2]);
        assert_eq!(p.label, Label::Human);
        let p = Prediction::from_probs([0.2, 0.4, 0.4]);
        assert_eq!(p.label, Label::Refined);
        let p = Prediction::<f64>::from_scores([0.0, 0.0, 0.0]);
        assert_eq!(p.probs, [1.0 / 3.0; 3]);
        assert_eq!(p.label, Label::Human);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = Prediction::from_scores([3.0f64, -1.0, 0.5]);
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.label, Label::Human);
        let p = Prediction::from_scores([1000.0f32, 0.0, 0.0]);
        assert!(p.probs[0] > 0.999);
    }
}
