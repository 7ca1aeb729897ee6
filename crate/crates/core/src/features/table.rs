use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{F2Mode, FeatureConfig, FeatureVector, SimilarityProfile, NUM_FEATURES};
use crate::corpus::{read_json_lines, write_json_lines, CorpusError, Label};

/// Feature settings a table row was computed with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSnapshot {
    pub tau: f64,
    pub k_refs: usize,
    pub top_k: usize,
    pub feature_mask: [bool; NUM_FEATURES],
    #[serde(default)]
    pub f2_mode: F2Mode,
}

impl From<&FeatureConfig> for FeatureSnapshot {
    fn from(c: &FeatureConfig) -> Self {
        Self {
            tau: c.tau,
            k_refs: c.k_refs,
            top_k: c.top_k,
            feature_mask: c.feature_mask,
            f2_mode: c.f2_mode,
        }
    }
}

/// One row of `features.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub review_id: String,
    pub paper_id: String,
    pub label: Option<Label>,
    pub features: FeatureVector<f64>,
    pub config: FeatureSnapshot,
    pub reference_ids: Vec<String>,
    /// Per-claim, per-reference best matches; lets τ change without
    /// recomputing embeddings.
    pub similarity: SimilarityProfile<f64>,
}

impl FeatureRecord {
    /// The feature vector with the threshold features recomputed at `tau`.
    pub fn at_tau(&self, tau: f64) -> FeatureVector<f64> {
        let mut v = self.features.clone();
        let (f1, f2) = self.similarity.threshold_features(tau, self.config.f2_mode);
        v.set_threshold_features(f1, f2);
        v
    }
}

pub fn save_feature_table(path: &Path, records: &[FeatureRecord]) -> Result<(), CorpusError> {
    write_json_lines(path, records)
}

pub fn load_feature_table(path: &Path) -> Result<Vec<FeatureRecord>, CorpusError> {
    read_json_lines(path)?
        .into_iter()
        .map(|(line, value)| {
            let rec: FeatureRecord = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
                line,
                message: e.to_string(),
            })?;
            if !rec.features.is_finite() {
                return Err(CorpusError::Validation {
                    id: rec.review_id,
                    reason: "non-finite feature value".into(),
                });
            }
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{SemanticFeatures, TextualFeatures};

    fn record() -> FeatureRecord {
        let similarity = SimilarityProfile {
            pair: vec![vec![0.95, 0.72, 0.1], vec![0.5, 0.6, 0.81]],
            intra_diversity: 0.3,
            total_claims: 4,
        };
        let cfg = FeatureConfig::default();
        let sem = similarity.features(cfg.tau, cfg.f2_mode);
        let text = TextualFeatures {
            perplexity: 3.0,
            mean_entropy: 1.0,
            top_k_rate: 0.9,
            curvature_score: 0.1,
        };
        FeatureRecord {
            review_id: "r".into(),
            paper_id: "p".into(),
            label: Some(Label::Human),
            features: FeatureVector::assemble(&sem, &text, cfg.feature_mask),
            config: (&cfg).into(),
            reference_ids: vec!["a".into(), "b".into(), "c".into()],
            similarity,
        }
    }

    #[test]
    fn retau_matches_direct_computation() {
        let r = record();
        assert_eq!(r.at_tau(0.8), r.features);
        let v = r.at_tau(0.7);
        let direct: SemanticFeatures<f64> = r.similarity.features(0.7, F2Mode::AllPairs);
        assert_eq!(v.prop_high_sim, direct.prop_high_sim);
        assert_eq!(v.mean_sim_above_tau, direct.mean_sim_above_tau);
        assert_eq!(v.prop_high_sim, 1.0);
        assert!((v.mean_sim_above_tau - (0.95 + 0.72 + 0.81) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.jsonl");
        save_feature_table(&path, &[record()]).unwrap();
        assert_eq!(load_feature_table(&path).unwrap(), vec![record()]);
    }
}
