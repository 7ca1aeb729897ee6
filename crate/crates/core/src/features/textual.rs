use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::providers::TokenScore;
use crate::scalar::{ordered_sum, Scalar};

/// Below this total variance the curvature score is defined as zero.
pub const VARIANCE_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TextualFeatures<T> {
    pub perplexity: T,
    pub mean_entropy: T,
    pub top_k_rate: T,
    pub curvature_score: T,
}

impl<T: Scalar> TextualFeatures<T> {
    pub fn zero() -> Self {
        Self {
            perplexity: T::zero(),
            mean_entropy: T::zero(),
            top_k_rate: T::zero(),
            curvature_score: T::zero(),
        }
    }
}

/// Perplexity, mean entropy, top-k rate and the analytic probability
/// curvature of a scored token sequence.
pub fn textual_features<T: Scalar>(scores: &[TokenScore<T>]) -> Result<TextualFeatures<T>, FeatureError> {
    if scores.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let t = T::of_usize(scores.len());
    let lp: Vec<T> = scores.iter().map(|s| s.logprob_actual).collect();
    let ent: Vec<T> = scores.iter().map(|s| s.entropy).collect();
    let exp: Vec<T> = scores.iter().map(|s| s.expected_logprob).collect();
    let var: Vec<T> = scores.iter().map(|s| s.logprob_variance).collect();
    let sum_lp = ordered_sum(&lp);
    let sum_var = ordered_sum(&var);
    let curvature_score = if sum_var < T::of(VARIANCE_GUARD) {
        T::zero()
    } else {
        (sum_lp - ordered_sum(&exp)) / sum_var.sqrt()
    };
    Ok(TextualFeatures {
        perplexity: (-(sum_lp / t)).exp(),
        mean_entropy: ordered_sum(&ent) / t,
        top_k_rate: T::of_usize(scores.iter().filter(|s| s.in_top_k).count()) / t,
        curvature_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub::{DegenerateScorer, StubScorer, UniformScorer};
    use crate::providers::TokenScorer;
    use proptest::prelude::*;

    fn ts(lp: f64, exp: f64, var: f64) -> TokenScore<f64> {
        TokenScore {
            logprob_actual: lp,
            entropy: -exp,
            in_top_k: true,
            expected_logprob: exp,
            logprob_variance: var,
        }
    }

    #[test]
    fn degenerate() {
        let s = DegenerateScorer.score_tokens("abc", 200).unwrap();
        let f = textual_features(&s).unwrap();
        assert_eq!(
            (f.perplexity, f.mean_entropy, f.top_k_rate, f.curvature_score),
            (1.0, 0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn uniform_four() {
        let s = UniformScorer { vocab_size: 4 }.score_tokens("ab", 200).unwrap();
        assert_eq!(s.len(), 2);
        let f = textual_features(&s).unwrap();
        assert!((f.perplexity - 4.0).abs() < 1e-12);
        assert!((f.mean_entropy - 4.0f64.ln()).abs() < 1e-12);
        assert_eq!(f.top_k_rate, 1.0);
        assert_eq!(f.curvature_score, 0.0);
    }

    #[test]
    fn two_position_curvature() {
        let s = [ts(-0.5, -1.0, 0.25), ts(-2.0, -1.5, 0.75)];
        let f = textual_features(&s).unwrap();
        // (-2.5 - -2.5) / 1 = 0 ; shift one to make it nonzero
        assert_eq!(f.curvature_score, 0.0);
        let s = [ts(-0.5, -1.0, 0.25), ts(-1.0, -1.5, 0.75)];
        let f = textual_features(&s).unwrap();
        assert!((f.curvature_score - 1.0).abs() < 1e-12);
        assert!((f.perplexity - 0.75f64.exp()).abs() < 1e-12);
        assert!((f.mean_entropy - 1.25).abs() < 1e-12);
    }

    #[test]
    fn top_k_rate_counts_membership() {
        let mut s = vec![ts(-1.0, -1.0, 0.0); 4];
        s[1].in_top_k = false;
        assert_eq!(textual_features(&s).unwrap().top_k_rate, 0.75);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(textual_features::<f64>(&[]), Err(FeatureError::EmptySequence)));
    }

    #[test]
    fn f32_matches_f64() {
        let s = StubScorer::new().score_tokens("the quick brown fox", 200).unwrap();
        let a = textual_features(&s).unwrap();
        let s32: Vec<TokenScore<f32>> = s.iter().map(|t| t.cast()).collect();
        let b = textual_features(&s32).unwrap();
        assert!((a.perplexity - b.perplexity as f64).abs() < 1e-4);
        assert!((a.curvature_score - b.curvature_score as f64).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn stub_scorer_bounds(text in "[a-z][a-z ]{0,79}", k in 1usize..40) {
            let s = StubScorer::new().score_tokens(&text, k).unwrap();
            let f = textual_features(&s).unwrap();
            prop_assert!(f.perplexity >= 1.0);
            prop_assert!((0.0..=1.0).contains(&f.top_k_rate));
            prop_assert!(f.mean_entropy >= 0.0);
            prop_assert!(f.curvature_score.is_finite());
        }
    }
}
