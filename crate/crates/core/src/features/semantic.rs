use serde::{Deserialize, Serialize};

use super::{F2Mode, FeatureConfig, FeatureError};
use crate::claims::{Claim, ClaimSet};
use crate::providers::EmbeddingVector;
use crate::scalar::{ordered_sum, Scalar};

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T, FeatureError> {
    cosine_slices(&a.values, &b.values)
}

fn cosine_slices<T: Scalar>(a: &[T], b: &[T]) -> Result<T, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(FeatureError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp_to(-T::one(), T::one()))
}

fn embedding<T: Scalar>(claim: &Claim<T>, index: usize) -> Result<&[T], FeatureError> {
    claim
        .embedding
        .as_ref()
        .map(|e| e.values.as_slice())
        .ok_or(FeatureError::MissingEmbedding { index })
}

/// Highest cosine between `claim` and any of `references`.
pub fn best_match_similarity<T: Scalar>(claim: &Claim<T>, references: &[Claim<T>]) -> Result<T, FeatureError> {
    if references.is_empty() {
        return Err(FeatureError::EmptyReferenceList);
    }
    let e = embedding(claim, 0)?;
    let mut best = -T::one();
    for (i, r) in references.iter().enumerate() {
        let c = cosine_slices(e, embedding(r, i)?)?;
        if c > best {
            best = c;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SemanticFeatures<T> {
    pub prop_high_sim: T,
    pub mean_sim_above_tau: T,
    pub mean_best_match: T,
    pub intra_diversity: T,
    pub log_claim_count: T,
    pub valid_semantic: bool,
    pub total_claims: usize,
    pub filtered_claims: usize,
}

/// Everything the semantic features need, independent of τ. `pair[i][j]` is
/// the best match of target claim `i` within reference review `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimilarityProfile<T> {
    pub pair: Vec<Vec<T>>,
    pub intra_diversity: T,
    pub total_claims: usize,
}

impl<T: Scalar> SimilarityProfile<T> {
    /// Computes the profile from filtered, embedded claim sets.
    pub fn compute(
        target: &ClaimSet<T>,
        references: &[ClaimSet<T>],
        total_extracted: usize,
    ) -> Result<Self, FeatureError> {
        if let Some(index) = references.iter().position(|r| r.is_empty()) {
            return Err(FeatureError::EmptyReference { index });
        }
        let mut pair = Vec::with_capacity(target.len());
        for (i, claim) in target.claims.iter().enumerate() {
            embedding(claim, i)?;
            let row = references
                .iter()
                .map(|r| best_match_similarity(claim, &r.claims))
                .collect::<Result<Vec<T>, _>>()?;
            pair.push(row);
        }
        let n = target.len();
        let intra_diversity = if n < 2 {
            T::zero()
        } else {
            let mut sims = Vec::with_capacity(n * (n - 1) / 2);
            for a in 0..n {
                for b in a + 1..n {
                    sims.push(cosine_slices(
                        embedding(&target.claims[a], a)?,
                        embedding(&target.claims[b], b)?,
                    )?);
                }
            }
            T::one() - ordered_sum(&sims) / T::of_usize(sims.len())
        };
        Ok(Self {
            pair,
            intra_diversity,
            total_claims: total_extracted,
        })
    }

    pub fn filtered_claims(&self) -> usize {
        self.pair.len()
    }

    /// Per-claim best match across all references.
    pub fn best(&self) -> Vec<T> {
        self.pair
            .iter()
            .map(|row| row.iter().copied().fold(-T::infinity(), T::max))
            .collect()
    }

    /// The two threshold-dependent features at `tau`.
    pub fn threshold_features(&self, tau: T, mode: F2Mode) -> (T, T) {
        if self.pair.is_empty() {
            return (T::zero(), T::zero());
        }
        let best = self.best();
        let above = best.iter().filter(|&&s| s > tau).count();
        let prop = T::of_usize(above) / T::of_usize(best.len());
        let selected: Vec<T> = match mode {
            F2Mode::AllPairs => self.pair.iter().flatten().copied().filter(|&s| s > tau).collect(),
            F2Mode::PerClaim => best.into_iter().filter(|&s| s > tau).collect(),
        };
        let mean_above = if selected.is_empty() {
            T::zero()
        } else {
            ordered_sum(&selected) / T::of_usize(selected.len())
        };
        (prop, mean_above)
    }

    pub fn features(&self, tau: T, mode: F2Mode) -> SemanticFeatures<T> {
        let n = self.pair.len();
        let log_claim_count = (T::one() + T::of_usize(self.total_claims)).ln();
        if n == 0 {
            return SemanticFeatures {
                prop_high_sim: T::zero(),
                mean_sim_above_tau: T::zero(),
                mean_best_match: T::zero(),
                intra_diversity: T::zero(),
                log_claim_count,
                valid_semantic: false,
                total_claims: self.total_claims,
                filtered_claims: 0,
            };
        }
        let (prop_high_sim, mean_sim_above_tau) = self.threshold_features(tau, mode);
        SemanticFeatures {
            prop_high_sim,
            mean_sim_above_tau,
            mean_best_match: ordered_sum(&self.best()) / T::of_usize(n),
            intra_diversity: self.intra_diversity,
            log_claim_count,
            valid_semantic: true,
            total_claims: self.total_claims,
            filtered_claims: n,
        }
    }

    pub fn cast<U: Scalar>(&self) -> SimilarityProfile<U> {
        SimilarityProfile {
            pair: self
                .pair
                .iter()
                .map(|row| row.iter().map(|v| U::of(v.to_f64_lossy())).collect())
                .collect(),
            intra_diversity: U::of(self.intra_diversity.to_f64_lossy()),
            total_claims: self.total_claims,
        }
    }
}

/// The five semantic features of `target` against `references`. Both sides
/// must already be filtered to evaluative claims and embedded.
pub fn semantic_features<T: Scalar>(
    target: &ClaimSet<T>,
    references: &[ClaimSet<T>],
    total_extracted: usize,
    config: &FeatureConfig,
) -> Result<SemanticFeatures<T>, FeatureError> {
    if references.len() != config.k_refs {
        return Err(FeatureError::ReferenceCount {
            expected: config.k_refs,
            got: references.len(),
        });
    }
    Ok(SimilarityProfile::compute(target, references, total_extracted)?.features(T::of(config.tau), config.f2_mode))
}
