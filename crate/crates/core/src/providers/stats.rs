use super::TokenScore;
use crate::scalar::Scalar;

/// Summarizes one next-token distribution `probs` for the token at index
/// `actual`. Zero-probability entries contribute nothing to the entropy or
/// moments. The actual token is in the top `k` when fewer than `k` tokens
/// are strictly more probable.
pub fn distribution_stats<T: Scalar>(probs: &[T], actual: usize, k: usize) -> TokenScore<T> {
    let p_actual = probs[actual];
    let mut expected = T::zero();
    let mut second = T::zero();
    for &p in probs {
        if p > T::zero() {
            let lp = p.ln();
            expected = expected + p * lp;
            second = second + p * lp * lp;
        }
    }
    let variance = (second - expected * expected).max(T::zero());
    let above = probs.iter().filter(|&&p| p > p_actual).count();
    TokenScore {
        logprob_actual: p_actual.ln(),
        entropy: (-expected).max(T::zero()),
        in_top_k: above < k,
        expected_logprob: expected,
        logprob_variance: variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_distribution() {
        let s = distribution_stats(&[0.0f64, 1.0, 0.0], 1, 1);
        assert_eq!(s.logprob_actual, 0.0);
        assert_eq!(s.entropy, 0.0);
        assert_eq!(s.logprob_variance, 0.0);
        assert!(s.in_top_k);
    }

    #[test]
    fn uniform_distribution() {
        let v = 7usize;
        let probs = vec![1.0 / v as f64; v];
        let s = distribution_stats(&probs, 3, 1);
        let ln_v = (v as f64).ln();
        assert!((s.entropy - ln_v).abs() < 1e-12);
        assert!((s.expected_logprob + ln_v).abs() < 1e-12);
        assert!(s.logprob_variance.abs() < 1e-12);
        assert!(s.in_top_k, "ties count in the actual token's favour");
    }

    #[test]
    fn two_token_closed_form() {
        let s = distribution_stats(&[0.75f64, 0.25], 1, 1);
        // H = -(3/4 ln 3/4 + 1/4 ln 1/4)
        let h = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((h - 0.5623351446188083).abs() < 1e-12);
        assert!((s.entropy - h).abs() < 1e-12);
        assert!((s.expected_logprob + h).abs() < 1e-12);
        // Var = sum p (ln p + H)^2
        let var = 0.75 * (0.75f64.ln() + h).powi(2) + 0.25 * (0.25f64.ln() + h).powi(2);
        assert!((s.logprob_variance - var).abs() < 1e-12);
        assert!((s.logprob_actual - 0.25f64.ln()).abs() < 1e-15);
        assert!(!s.in_top_k);
        assert!(distribution_stats(&[0.75f64, 0.25], 1, 2).in_top_k);
    }
}
