use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Tree, TreeParams};
use super::{ClassifierError, GbdtHyperparams, Prediction};
use crate::corpus::Label;
use crate::features::{FeatureVector, NUM_FEATURES};
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const NUM_CLASSES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GbdtModel<T> {
    pub format_version: u32,
    /// Class of each output index.
    pub classes: [Label; NUM_CLASSES],
    /// Per-class intercepts.
    pub base_scores: [T; NUM_CLASSES],
    /// One tree per class per boosting round.
    pub rounds: Vec<[Tree<T>; NUM_CLASSES]>,
    pub hyperparams: GbdtHyperparams,
    pub feature_mask: [bool; NUM_FEATURES],
}

impl<T: Scalar> GbdtModel<T> {
    /// A model with intercepts only.
    pub fn intercept_only(
        base_scores: [T; NUM_CLASSES],
        hyperparams: GbdtHyperparams,
        mask: [bool; NUM_FEATURES],
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            classes: Label::ALL,
            base_scores,
            rounds: Vec::new(),
            hyperparams,
            feature_mask: mask,
        }
    }

    pub fn raw_scores(&self, x: &[T; NUM_FEATURES]) -> [T; NUM_CLASSES] {
        let mut s = self.base_scores;
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                s[k] = s[k] + tree.predict(x);
            }
        }
        s
    }

    pub fn predict_row(&self, x: &[T; NUM_FEATURES]) -> Prediction<T> {
        Prediction::from_scores(self.raw_scores(x))
    }

    pub fn predict(&self, features: &FeatureVector<T>) -> Result<Prediction<T>, ClassifierError> {
        if features.feature_mask != self.feature_mask {
            return Err(ClassifierError::MaskMismatch {
                expected: self.feature_mask.to_vec(),
                got: features.feature_mask.to_vec(),
            });
        }
        Ok(self.predict_row(&features.values()))
    }

    /// Checks structural invariants.
    pub fn check(&self) -> Result<(), ClassifierError> {
        if self.classes != Label::ALL {
            return Err(ClassifierError::Format(format!(
                "unexpected class mapping {:?}",
                self.classes
            )));
        }
        if self.base_scores.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Format("non-finite intercept".into()));
        }
        for (r, round) in self.rounds.iter().enumerate() {
            for tree in round {
                if !tree.is_well_formed()
                    || tree.depth() > self.hyperparams.max_depth
                    || tree.leaf_count() > self.hyperparams.num_leaves
                {
                    return Err(ClassifierError::Format(format!("malformed tree in round {r}")));
                }
            }
        }
        Ok(())
    }
}

fn validate_inputs<T: Scalar>(
    x: &[[T; NUM_FEATURES]],
    labels: &[Label],
    hp: &GbdtHyperparams,
) -> Result<(), ClassifierError> {
    hp.validate()?;
    if x.len() != labels.len() {
        return Err(ClassifierError::Data(format!(
            "{} rows but {} labels",
            x.len(),
            labels.len()
        )));
    }
    let need = hp.min_samples_leaf * NUM_CLASSES;
    if x.len() < need {
        return Err(ClassifierError::Data(format!(
            "{} rows; at least min_samples_leaf x 3 = {need} required",
            x.len()
        )));
    }
    for (row, v) in x.iter().enumerate() {
        if let Some(feature) = v.iter().position(|f| !f.is_finite()) {
            return Err(ClassifierError::NonFinite { row, feature });
        }
    }
    let mut seen = [false; NUM_CLASSES];
    for l in labels {
        seen[l.index()] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ClassifierError::Data("labels cover a single class".into()));
    }
    Ok(())
}

fn log_loss<T: Scalar>(scores: &[[T; NUM_CLASSES]], labels: &[Label]) -> T {
    let mut total = T::zero();
    for (s, l) in scores.iter().zip(labels) {
        let m = s.iter().copied().fold(T::neg_infinity(), T::max);
        let z = s.iter().fold(T::zero(), |acc, &v| acc + (v - m).exp());
        total = total - (s[l.index()] - m - z.ln());
    }
    total / T::of_usize(scores.len())
}

/// Trains on raw feature rows. `mask` is recorded on the model.
pub fn train_rows<T: Scalar>(
    x: &[[T; NUM_FEATURES]],
    labels: &[Label],
    mask: [bool; NUM_FEATURES],
    hp: &GbdtHyperparams,
) -> Result<(GbdtModel<T>, Vec<T>), ClassifierError> {
    validate_inputs(x, labels, hp)?;
    let n = x.len();
    let weights = hp.class_weights.unwrap_or([1.0; NUM_CLASSES]).map(T::of);

    // centered log of smoothed class priors
    let mut counts = [0usize; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    let logp = counts.map(|c| (T::of_usize(c + 1) / T::of_usize(n + NUM_CLASSES)).ln());
    let mean = (logp[0] + logp[1] + logp[2]) / T::of_usize(NUM_CLASSES);
    let base = logp.map(|v| v - mean);

    let params = TreeParams {
        max_depth: hp.max_depth,
        num_leaves: hp.num_leaves,
        min_samples_leaf: hp.min_samples_leaf,
        min_split_gain: T::of(hp.min_split_gain),
        l1: T::of(hp.l1),
        l2: T::of(hp.l2),
        learning_rate: T::of(hp.learning_rate),
    };
    let hess_factor = T::of_usize(NUM_CLASSES) / T::of_usize(NUM_CLASSES - 1);
    let n_sub = ((n as f64 * hp.subsample).round() as usize).clamp(1, n);
    let n_feat = ((NUM_FEATURES as f64 * hp.feature_subsample).ceil() as usize).clamp(1, NUM_FEATURES);

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut model = GbdtModel::intercept_only(base, hp.clone(), mask);
    let mut scores = vec![base; n];
    let mut history = vec![log_loss(&scores, labels)];
    let mut grad = vec![vec![T::zero(); n]; NUM_CLASSES];
    let mut hess = vec![vec![T::zero(); n]; NUM_CLASSES];

    for _ in 0..hp.num_rounds {
        for (i, s) in scores.iter().enumerate() {
            let p = Prediction::from_scores(*s).probs;
            let w = weights[labels[i].index()];
            for k in 0..NUM_CLASSES {
                let y = if labels[i].index() == k { T::one() } else { T::zero() };
                grad[k][i] = (p[k] - y) * w;
                hess[k][i] = hess_factor * p[k] * (T::one() - p[k]) * w;
            }
        }
        let rows: Vec<usize> = if n_sub < n {
            let mut r = sample(&mut rng, n, n_sub).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let trees: [Tree<T>; NUM_CLASSES] = std::array::from_fn(|k| {
            let features: Vec<usize> = if n_feat < NUM_FEATURES {
                let mut f = sample(&mut rng, NUM_FEATURES, n_feat).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..NUM_FEATURES).collect()
            };
            fit_tree(x, &grad[k], &hess[k], rows.clone(), &features, &params)
        });
        for (xi, s) in x.iter().zip(scores.iter_mut()) {
            for (k, tree) in trees.iter().enumerate() {
                s[k] = s[k] + tree.predict(xi);
            }
        }
        model.rounds.push(trees);
        history.push(log_loss(&scores, labels));
    }
    Ok((model, history))
}

fn rows_of<T: Scalar>(
    features: &[FeatureVector<T>],
) -> Result<(Vec<[T; NUM_FEATURES]>, [bool; NUM_FEATURES]), ClassifierError> {
    let mask = features
        .first()
        .map(|f| f.feature_mask)
        .ok_or_else(|| ClassifierError::Data("no training rows".into()))?;
    if let Some(f) = features.iter().find(|f| f.feature_mask != mask) {
        return Err(ClassifierError::MaskMismatch {
            expected: mask.to_vec(),
            got: f.feature_mask.to_vec(),
        });
    }
    Ok((features.iter().map(|f| f.values()).collect(), mask))
}

/// Fits the multiclass boosted ensemble.
pub fn train<T: Scalar>(
    features: &[FeatureVector<T>],
    labels: &[Label],
    hp: &GbdtHyperparams,
) -> Result<GbdtModel<T>, ClassifierError> {
    train_with_history(features, labels, hp).map(|(m, _)| m)
}

/// Like [`train`], also returning the training log-loss before the first
/// round and after every round.
pub fn train_with_history<T: Scalar>(
    features: &[FeatureVector<T>],
    labels: &[Label],
    hp: &GbdtHyperparams,
) -> Result<(GbdtModel<T>, Vec<T>), ClassifierError> {
    let (x, mask) = rows_of(features)?;
    train_rows(&x, labels, mask, hp)
}

pub fn save_model<T: Scalar>(path: &Path, model: &GbdtModel<T>) -> Result<(), ClassifierError> {
    let text = serde_json::to_string_pretty(model).map_err(|e| ClassifierError::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<GbdtModel<T>, ClassifierError> {
    let text = std::fs::read_to_string(path).map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ClassifierError::Format(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ClassifierError::Format("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(ClassifierError::Version(version as u32));
    }
    let model: GbdtModel<T> = serde_json::from_value(value).map_err(|e| ClassifierError::Format(e.to_string()))?;
    model.check()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Node;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n_per: usize, seed: u64, spread: f64) -> (Vec<[f64; NUM_FEATURES]>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_per * 3 {
            let c = i % 3;
            let mut row = [0.0; NUM_FEATURES];
            for (f, v) in row.iter_mut().enumerate() {
                let center = if f % 3 == c { 3.0 } else { 0.0 };
                *v = center + noise.sample(&mut rng);
            }
            x.push(row);
            y.push(Label::from_index(c).unwrap());
        }
        (x, y)
    }

    fn fv(x: &[f64; NUM_FEATURES]) -> FeatureVector<f64> {
        FeatureVector {
            prop_high_sim: x[0],
            mean_sim_above_tau: x[1],
            mean_best_match: x[2],
            intra_diversity: x[3],
            log_claim_count: x[4],
            perplexity: x[5],
            mean_entropy: x[6],
            top_k_rate: x[7],
            curvature_score: x[8],
            valid_semantic: true,
            feature_mask: [true; NUM_FEATURES],
            total_claims: 0,
            filtered_claims: 0,
        }
    }

    #[test]
    fn zero_rounds_balanced_is_uniform() {
        let (x, y) = blobs(20, 1, 1.0);
        let hp = GbdtHyperparams {
            num_rounds: 0,
            min_samples_leaf: 5,
            ..Default::default()
        };
        let (m, h) = train_rows(&x, &y, [true; NUM_FEATURES], &hp).unwrap();
        assert_eq!(m.predict_row(&x[0]).probs, [1.0 / 3.0; 3]);
        assert_eq!(h.len(), 1);
        assert!((h[0] - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn learns_blobs_and_loss_decreases() {
        let (x, y) = blobs(100, 2, 1.0);
        let (m, h) = train_rows(&x, &y, [true; NUM_FEATURES], &GbdtHyperparams::default()).unwrap();
        assert_eq!(h.len(), 101);
        for w in h.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
        let (xt, yt) = blobs(50, 3, 1.0);
        let correct = xt
            .iter()
            .zip(&yt)
            .filter(|(r, l)| m.predict_row(r).label == **l)
            .count();
        assert!(correct as f64 / xt.len() as f64 > 0.95);
        m.check().unwrap();
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let (x, y) = blobs(40, 4, 1.5);
        let hp = GbdtHyperparams {
            num_rounds: 20,
            min_samples_leaf: 5,
            feature_subsample: 0.5,
            ..Default::default()
        };
        let a = train_rows(&x, &y, [true; NUM_FEATURES], &hp).unwrap().0;
        let b = train_rows(&x, &y, [true; NUM_FEATURES], &hp).unwrap().0;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = train_rows(&x, &y, [true; NUM_FEATURES], &GbdtHyperparams { seed: 1, ..hp })
            .unwrap()
            .0;
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_data() {
        let (x, mut y) = blobs(40, 5, 1.0);
        let hp = GbdtHyperparams::default();
        let mut bad = x.clone();
        bad[7][3] = f64::NAN;
        assert!(matches!(
            train_rows(&bad, &y, [true; NUM_FEATURES], &hp),
            Err(ClassifierError::NonFinite { row: 7, feature: 3 })
        ));
        y.iter_mut().for_each(|l| *l = Label::Ai);
        assert!(matches!(
            train_rows(&x, &y, [true; NUM_FEATURES], &hp),
            Err(ClassifierError::Data(_))
        ));
        let (x, y) = blobs(5, 5, 1.0);
        assert!(matches!(
            train_rows(&x, &y, [true; NUM_FEATURES], &hp),
            Err(ClassifierError::Data(_))
        ));
    }

    #[test]
    fn hand_traced_prediction() {
        let tree = |f: usize, t: f64, lo: f64, hi: f64| Tree {
            nodes: vec![
                Node::Split {
                    feature: f,
                    threshold: t,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: lo },
                Node::Leaf { value: hi },
            ],
        };
        let mut m = GbdtModel::intercept_only([0.0, 0.0, 0.0], GbdtHyperparams::default(), [true; NUM_FEATURES]);
        m.rounds
            .push([tree(0, 0.5, 1.0, -1.0), tree(1, 0.5, 0.0, 2.0), Tree::leaf(0.5)]);
        let mut x = [0.0; NUM_FEATURES];
        x[0] = 0.2;
        x[1] = 0.9;
        // scores (1, 2, 0.5)
        let e = [1.0f64.exp(), 2.0f64.exp(), 0.5f64.exp()];
        let z: f64 = e.iter().sum();
        let p = m.predict_row(&x);
        for k in 0..3 {
            assert!((p.probs[k] - e[k] / z).abs() < 1e-15);
        }
        assert_eq!(p.label, Label::Refined);
        // x[0] exactly at the threshold goes left
        x[0] = 0.5;
        assert_eq!(m.raw_scores(&x)[0], 1.0);
    }

    #[test]
    fn mask_mismatch_is_rejected() {
        let m = GbdtModel::intercept_only([0.0; 3], GbdtHyperparams::default(), [true; NUM_FEATURES]);
        let mut v = fv(&[0.0; NUM_FEATURES]);
        v.feature_mask[8] = false;
        assert!(matches!(m.predict(&v), Err(ClassifierError::MaskMismatch { .. })));
    }

    #[test]
    fn save_load_round_trip_and_version_check() {
        let (x, y) = blobs(30, 6, 1.0);
        let feats: Vec<_> = x.iter().map(fv).collect();
        let hp = GbdtHyperparams {
            num_rounds: 10,
            min_samples_leaf: 5,
            ..Default::default()
        };
        let m = train(&feats, &y, &hp).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &m).unwrap();
        let back: GbdtModel<f64> = load_model(&path).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let r: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-2.0..5.0));
            assert_eq!(m.predict_row(&r), back.predict_row(&r));
        }
        let bytes = std::fs::read(&path).unwrap();
        save_model(&path, &back).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());

        let text =
            std::fs::read_to_string(&path)
                .unwrap()
                .replacen("\"format_version\": 1", "\"format_version\": 99", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_model::<f64>(&path), Err(ClassifierError::Version(99))));
    }

    #[test]
    fn trains_in_f32() {
        let (x, y) = blobs(40, 7, 1.0);
        let x32: Vec<[f32; NUM_FEATURES]> = x.iter().map(|r| r.map(|v| v as f32)).collect();
        let hp = GbdtHyperparams {
            num_rounds: 20,
            min_samples_leaf: 5,
            ..Default::default()
        };
        let (m, _) = train_rows(&x32, &y, [true; NUM_FEATURES], &hp).unwrap();
        let correct = x32
            .iter()
            .zip(&y)
            .filter(|(r, l)| m.predict_row(r).label == **l)
            .count();
        assert!(correct as f64 / x32.len() as f64 > 0.9);
    }
}
