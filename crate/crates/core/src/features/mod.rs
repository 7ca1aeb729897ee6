//! The nine-dimensional feature vector: five claim-level semantic features
//! measured against paired AI reference reviews and four token-statistics
//! textual features.

mod featurize;
mod pairing;
mod semantic;
mod table;
mod textual;

pub use featurize::{FeaturizedReview, Featurizer, ProviderSet};
pub use pairing::pair_references;
pub use semantic::{best_match_similarity, cosine, semantic_features, SemanticFeatures, SimilarityProfile};
pub use table::{load_feature_table, save_feature_table, FeatureRecord, FeatureSnapshot};
pub use textual::{textual_features, TextualFeatures};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::ClaimError;
use crate::genpipeline::GenError;
use crate::providers::ProviderError;
use crate::scalar::Scalar;

pub const NUM_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "prop_high_sim",
    "mean_sim_above_tau",
    "mean_best_match",
    "intra_diversity",
    "log_claim_count",
    "perplexity",
    "mean_entropy",
    "top_k_rate",
    "curvature_score",
];

/// Threshold grid swept jointly with the classifier hyperparameters.
pub const TAU_GRID: [f64; 5] = [0.70, 0.75, 0.80, 0.85, 0.90];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("embedding dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-length embedding")]
    ZeroVector,
    #[error("claim {index} has no embedding")]
    MissingEmbedding { index: usize },
    #[error("reference claim list is empty")]
    EmptyReferenceList,
    #[error("reference review {index} has no evaluative claims")]
    EmptyReference { index: usize },
    #[error("expected {expected} reference reviews, got {got}")]
    ReferenceCount { expected: usize, got: usize },
    #[error("token score sequence is empty")]
    EmptySequence,
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error(
        "review {review_id}: only {found} of {needed} AI reference reviews available for paper {paper_id}; \
         generate references on demand"
    )]
    Pairing {
        review_id: String,
        paper_id: String,
        needed: usize,
        found: usize,
    },
    #[error("review {review_id}: claim extraction failed: {source}")]
    Extract {
        review_id: String,
        #[source]
        source: ClaimError,
    },
    #[error("review {review_id}: embedding failed: {source}")]
    Embed {
        review_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("review {review_id}: token scoring failed: {source}")]
    Score {
        review_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("review {review_id}: reference generation failed: {source}")]
    Generate {
        review_id: String,
        #[source]
        source: GenError,
    },
    #[error("review {review_id}: {stage}: {source}")]
    Stage {
        review_id: String,
        stage: &'static str,
        #[source]
        source: Box<FeatureError>,
    },
}

impl FeatureError {
    /// True when the failure came from a remote or stub provider.
    pub fn is_provider(&self) -> bool {
        match self {
            FeatureError::Embed { .. } | FeatureError::Score { .. } => true,
            FeatureError::Extract { source, .. } => matches!(source, ClaimError::Provider(_)),
            FeatureError::Generate { source, .. } => matches!(source, GenError::Provider { .. }),
            FeatureError::Stage { source, .. } => source.is_provider(),
            _ => false,
        }
    }
}

/// Which definition of the second semantic feature to compute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F2Mode {
    /// Mean of every per-reference best match `s_ij` above τ.
    #[default]
    AllPairs,
    /// Mean of the per-claim maxima `s_i` above τ.
    PerClaim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub tau: f64,
    pub k_refs: usize,
    pub top_k: usize,
    pub feature_mask: [bool; NUM_FEATURES],
    pub f2_mode: F2Mode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            tau: 0.8,
            k_refs: 3,
            top_k: 200,
            feature_mask: [true; NUM_FEATURES],
            f2_mode: F2Mode::AllPairs,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(FeatureError::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.k_refs == 0 {
            return Err(FeatureError::Config("k_refs must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(FeatureError::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn textual_enabled(&self) -> bool {
        self.feature_mask[5..].iter().any(|&m| m)
    }
}

/// Classifier input for one review.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureVector<T> {
    pub prop_high_sim: T,
    pub mean_sim_above_tau: T,
    pub mean_best_match: T,
    pub intra_diversity: T,
    pub log_claim_count: T,
    pub perplexity: T,
    pub mean_entropy: T,
    pub top_k_rate: T,
    pub curvature_score: T,
    /// At least one evaluative claim survived filtering.
    pub valid_semantic: bool,
    pub feature_mask: [bool; NUM_FEATURES],
    /// Claims extracted before filtering (feeds `log_claim_count`).
    pub total_claims: usize,
    /// Evaluative claims (feed the other semantic features).
    pub filtered_claims: usize,
}

impl<T: Scalar> FeatureVector<T> {
    /// Assembles a vector and zeroes the masked entries.
    pub fn assemble(semantic: &SemanticFeatures<T>, textual: &TextualFeatures<T>, mask: [bool; NUM_FEATURES]) -> Self {
        let mut v = Self {
            prop_high_sim: semantic.prop_high_sim,
            mean_sim_above_tau: semantic.mean_sim_above_tau,
            mean_best_match: semantic.mean_best_match,
            intra_diversity: semantic.intra_diversity,
            log_claim_count: semantic.log_claim_count,
            perplexity: textual.perplexity,
            mean_entropy: textual.mean_entropy,
            top_k_rate: textual.top_k_rate,
            curvature_score: textual.curvature_score,
            valid_semantic: semantic.valid_semantic,
            feature_mask: mask,
            total_claims: semantic.total_claims,
            filtered_claims: semantic.filtered_claims,
        };
        v.apply_mask(mask);
        v
    }

    pub fn values(&self) -> [T; NUM_FEATURES] {
        [
            self.prop_high_sim,
            self.mean_sim_above_tau,
            self.mean_best_match,
            self.intra_diversity,
            self.log_claim_count,
            self.perplexity,
            self.mean_entropy,
            self.top_k_rate,
            self.curvature_score,
        ]
    }

    fn slots(&mut self) -> [&mut T; NUM_FEATURES] {
        [
            &mut self.prop_high_sim,
            &mut self.mean_sim_above_tau,
            &mut self.mean_best_match,
            &mut self.intra_diversity,
            &mut self.log_claim_count,
            &mut self.perplexity,
            &mut self.mean_entropy,
            &mut self.top_k_rate,
            &mut self.curvature_score,
        ]
    }

    /// Zeroes every entry whose mask bit is false and records the mask.
    pub fn apply_mask(&mut self, mask: [bool; NUM_FEATURES]) {
        for (slot, keep) in self.slots().into_iter().zip(mask) {
            if !keep {
                *slot = T::zero();
            }
        }
        self.feature_mask = mask;
    }

    /// Replaces the first two semantic features, e.g. after re-thresholding.
    pub fn set_threshold_features(&mut self, prop_high_sim: T, mean_sim_above_tau: T) {
        self.prop_high_sim = if self.feature_mask[0] { prop_high_sim } else { T::zero() };
        self.mean_sim_above_tau = if self.feature_mask[1] {
            mean_sim_above_tau
        } else {
            T::zero()
        };
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> FeatureVector<U> {
        let c = |v: T| U::of(v.to_f64_lossy());
        FeatureVector {
            prop_high_sim: c(self.prop_high_sim),
            mean_sim_above_tau: c(self.mean_sim_above_tau),
            mean_best_match: c(self.mean_best_match),
            intra_diversity: c(self.intra_diversity),
            log_claim_count: c(self.log_claim_count),
            perplexity: c(self.perplexity),
            mean_entropy: c(self.mean_entropy),
            top_k_rate: c(self.top_k_rate),
            curvature_score: c(self.curvature_score),
            valid_semantic: self.valid_semantic,
            feature_mask: self.feature_mask,
            total_claims: self.total_claims,
            filtered_claims: self.filtered_claims,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureVector<f64> {
        let s = SemanticFeatures {
            prop_high_sim: 0.5,
            mean_sim_above_tau: 0.9,
            mean_best_match: 0.7,
            intra_diversity: 0.4,
            log_claim_count: 2.0f64.ln(),
            valid_semantic: true,
            total_claims: 1,
            filtered_claims: 1,
        };
        let t = TextualFeatures {
            perplexity: 4.0,
            mean_entropy: 1.2,
            top_k_rate: 1.0,
            curvature_score: -0.3,
        };
        FeatureVector::assemble(&s, &t, [true; NUM_FEATURES])
    }

    #[test]
    fn defaults() {
        let c = FeatureConfig::default();
        assert_eq!((c.tau, c.k_refs, c.top_k), (0.8, 3, 200));
        assert!(c.feature_mask.iter().all(|&m| m));
        assert_eq!(c.f2_mode, F2Mode::AllPairs);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad = FeatureConfig {
            tau: 1.5,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            k_refs: 0,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn masking_textual_zeroes_f6_to_f9() {
        let mut v = sample();
        let mut mask = [true; NUM_FEATURES];
        mask[5..].iter_mut().for_each(|m| *m = false);
        v.apply_mask(mask);
        assert_eq!(&v.values()[5..], &[0.0; 4]);
        assert_eq!(v.values()[0], 0.5);
        assert_eq!(v.feature_mask, mask);
    }

    #[test]
    fn threshold_update_respects_mask() {
        let mut v = sample();
        let mut mask = [true; NUM_FEATURES];
        mask[1] = false;
        v.apply_mask(mask);
        v.set_threshold_features(0.25, 0.95);
        assert_eq!((v.prop_high_sim, v.mean_sim_above_tau), (0.25, 0.0));
    }

    #[test]
    fn config_toml_uses_defaults() {
        let c: FeatureConfig = toml::from_str("tau = 0.75").unwrap();
        assert_eq!(c.tau, 0.75);
        assert_eq!(c.k_refs, 3);
    }
}
