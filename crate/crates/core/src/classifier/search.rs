use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::train_rows;
use super::{ClassifierError, GbdtHyperparams};
use crate::corpus::{assign_groups, GroupCounts, Label};
use crate::evaluation::macro_f1;
use crate::features::{FeatureRecord, NUM_FEATURES};

pub const CV_FOLDS: usize = 5;

/// Inclusive bounds for random search. Rates marked log-uniform are drawn
/// uniformly in log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamRanges {
    pub num_rounds: [usize; 2],
    /// Log-uniform.
    pub learning_rate: [f64; 2],
    pub max_depth: [usize; 2],
    pub num_leaves: [usize; 2],
    pub subsample: [f64; 2],
    pub min_samples_leaf: [usize; 2],
    pub min_split_gain: [f64; 2],
    /// Log-uniform.
    pub l1: [f64; 2],
    /// Log-uniform.
    pub l2: [f64; 2],
}

impl Default for HyperparamRanges {
    fn default() -> Self {
        Self {
            num_rounds: [50, 300],
            learning_rate: [0.01, 0.3],
            max_depth: [3, 9],
            num_leaves: [7, 63],
            subsample: [0.5, 1.0],
            min_samples_leaf: [10, 60],
            min_split_gain: [0.0, 0.5],
            l1: [0.01, 10.0],
            l2: [0.01, 10.0],
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo.ln()..=hi.ln()).exp()
    }
}

impl HyperparamRanges {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let int = [self.num_rounds, self.max_depth, self.num_leaves, self.min_samples_leaf];
        let real = [self.subsample, self.min_split_gain];
        let logs = [self.learning_rate, self.l1, self.l2];
        if int.iter().any(|r| r[0] > r[1])
            || real.iter().chain(&logs).any(|r| !(r[0] <= r[1]))
            || logs.iter().any(|r| !(r[0] > 0.0))
        {
            return Err(ClassifierError::Hyperparams(format!("invalid search ranges {self:?}")));
        }
        Ok(())
    }

    /// Draws one configuration; `num_leaves` is capped at `2^max_depth`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, seed: u64) -> GbdtHyperparams {
        let num_rounds = rng.random_range(self.num_rounds[0]..=self.num_rounds[1]);
        let learning_rate = log_uniform(rng, self.learning_rate);
        let max_depth = rng.random_range(self.max_depth[0]..=self.max_depth[1]);
        let num_leaves = rng
            .random_range(self.num_leaves[0]..=self.num_leaves[1])
            .min(1usize << max_depth.min(30));
        let subsample = rng.random_range(self.subsample[0]..=self.subsample[1]);
        let min_samples_leaf = rng.random_range(self.min_samples_leaf[0]..=self.min_samples_leaf[1]);
        let min_split_gain = rng.random_range(self.min_split_gain[0]..=self.min_split_gain[1]);
        let l1 = log_uniform(rng, self.l1);
        let l2 = log_uniform(rng, self.l2);
        GbdtHyperparams {
            num_rounds,
            learning_rate,
            max_depth,
            num_leaves,
            subsample,
            feature_subsample: 1.0,
            min_samples_leaf,
            min_split_gain,
            l1,
            l2,
            seed,
            class_weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchSpace {
    Random(HyperparamRanges),
    /// Explicit candidates, tried in order.
    Grid {
        candidates: Vec<GbdtHyperparams>,
    },
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::Random(HyperparamRanges::default())
    }
}

impl SearchSpace {
    pub fn candidates(&self, n_trials: usize, seed: u64) -> Result<Vec<GbdtHyperparams>, ClassifierError> {
        match self {
            SearchSpace::Random(r) => {
                r.validate()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..n_trials).map(|_| r.draw(&mut rng, seed)).collect())
            }
            SearchSpace::Grid { candidates } => {
                if candidates.is_empty() {
                    return Err(ClassifierError::Hyperparams("empty candidate grid".into()));
                }
                Ok(candidates.iter().take(n_trials).cloned().collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub tau: f64,
    pub hyperparams: GbdtHyperparams,
    pub fold_scores: Vec<f64>,
    /// Mean macro-F1 over folds; absent when a fold failed.
    pub mean_macro_f1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: GbdtHyperparams,
    pub best_tau: f64,
    pub best_score: f64,
    pub folds: usize,
    pub trials: Vec<TrialResult>,
}

/// Paper-grouped, class-stratified fold index for every row.
fn fold_assignment(labels: &[Label], paper_ids: &[String], seed: u64) -> Result<Vec<usize>, ClassifierError> {
    let mut tallies: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
    for (l, p) in labels.iter().zip(paper_ids) {
        tallies.entry(p.as_str()).or_default()[l.index()] += 1;
    }
    let n_groups = tallies.len();
    if n_groups < CV_FOLDS {
        return Err(ClassifierError::Data(format!(
            "{n_groups} papers; grouped {CV_FOLDS}-fold cross-validation needs at least {CV_FOLDS}"
        )));
    }
    let groups: Vec<GroupCounts> = tallies
        .iter()
        .map(|(g, c)| GroupCounts {
            group: g.to_string(),
            counts: *c,
        })
        .collect();
    let capacities: Vec<usize> = (0..CV_FOLDS)
        .map(|f| n_groups / CV_FOLDS + usize::from(f < n_groups % CV_FOLDS))
        .collect();
    let buckets = assign_groups(&groups, &capacities, seed);
    let fold_of: BTreeMap<&str, usize> = tallies.keys().copied().zip(buckets).collect();
    Ok(paper_ids.iter().map(|p| fold_of[p.as_str()]).collect())
}

/// Cross-validated search over hyperparameters and τ. `by_tau` holds the
/// feature rows recomputed at each τ, all in the same row order as `labels`
/// and `paper_ids`. The best (trial, τ) by mean macro-F1 wins; ties keep the
/// earlier trial, then the smaller τ.
pub fn cv_search_rows(
    by_tau: &[(f64, Vec<[f64; NUM_FEATURES]>)],
    labels: &[Label],
    paper_ids: &[String],
    mask: [bool; NUM_FEATURES],
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
) -> Result<SearchResult, ClassifierError> {
    if n_trials == 0 {
        return Err(ClassifierError::Hyperparams("n_trials must be at least 1".into()));
    }
    if by_tau.is_empty() {
        return Err(ClassifierError::Hyperparams("empty tau grid".into()));
    }
    if labels.len() != paper_ids.len() || by_tau.iter().any(|(_, x)| x.len() != labels.len()) {
        return Err(ClassifierError::Data(
            "rows, labels and paper ids differ in length".into(),
        ));
    }
    let folds = fold_assignment(labels, paper_ids, seed)?;
    let candidates = space.candidates(n_trials, seed)?;

    let jobs: Vec<(usize, usize, usize)> = (0..candidates.len())
        .flat_map(|t| (0..by_tau.len()).flat_map(move |u| (0..CV_FOLDS).map(move |f| (t, u, f))))
        .collect();
    let scores: Vec<Result<f64, String>> = jobs
        .par_iter()
        .map(|&(t, u, f)| {
            let x = &by_tau[u].1;
            let (mut xtr, mut ytr, mut xte, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..labels.len() {
                if folds[i] == f {
                    xte.push(x[i]);
                    yte.push(labels[i]);
                } else {
                    xtr.push(x[i]);
                    ytr.push(labels[i]);
                }
            }
            let (model, _) = train_rows(&xtr, &ytr, mask, &candidates[t]).map_err(|e| e.to_string())?;
            let preds: Vec<Label> = xte.iter().map(|r| model.predict_row(r).label).collect();
            macro_f1(&preds, &yte).map(|m| m.value).map_err(|e| e.to_string())
        })
        .collect();

    let mut trials = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for (chunk_index, chunk) in scores.chunks(CV_FOLDS).enumerate() {
        let (t, u) = (chunk_index / by_tau.len(), chunk_index % by_tau.len());
        let error = chunk.iter().find_map(|r| r.as_ref().err().cloned());
        let fold_scores: Vec<f64> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let mean = error
            .is_none()
            .then(|| fold_scores.iter().sum::<f64>() / CV_FOLDS as f64);
        if let Some(e) = &error {
            log::warn!("trial {t} at tau {}: skipped ({e})", by_tau[u].0);
        }
        if let Some(m) = mean {
            if best.is_none_or(|(b, _)| m > b) {
                best = Some((m, trials.len()));
            }
        }
        trials.push(TrialResult {
            trial: t,
            tau: by_tau[u].0,
            hyperparams: candidates[t].clone(),
            fold_scores,
            mean_macro_f1: mean,
            error,
        });
    }
    let (best_score, i) = best.ok_or_else(|| ClassifierError::Data("every search trial failed".into()))?;
    Ok(SearchResult {
        best: trials[i].hyperparams.clone(),
        best_tau: trials[i].tau,
        best_score,
        folds: CV_FOLDS,
        trials,
    })
}

/// [`cv_search_rows`] over a feature table, re-thresholding the first two
/// features at each τ from the stored similarity profiles.
pub fn cv_search(
    records: &[FeatureRecord],
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    taus: &[f64],
) -> Result<SearchResult, ClassifierError> {
    let first = records
        .first()
        .ok_or_else(|| ClassifierError::Data("empty feature table".into()))?;
    let mask = first.features.feature_mask;
    let labels = records
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| ClassifierError::Data(format!("review {} has no label", r.review_id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let paper_ids: Vec<String> = records.iter().map(|r| r.paper_id.clone()).collect();
    let by_tau: Vec<(f64, Vec<[f64; NUM_FEATURES]>)> = taus
        .iter()
        .map(|&tau| (tau, records.iter().map(|r| r.at_tau(tau).values()).collect()))
        .collect();
    cv_search_rows(&by_tau, &labels, &paper_ids, mask, space, n_trials, seed)
}
