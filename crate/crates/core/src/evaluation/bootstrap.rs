use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_ITERATIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    /// Sample standard deviation over resamples.
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Resamples whose metric was defined.
    pub used: usize,
    pub skipped: usize,
}

/// Linear-interpolation percentile of sorted values, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resamples `data` with replacement `iterations` times and summarizes
/// `metric` over the resamples. Resamples where the metric is undefined
/// (returns `None`) are skipped. Iteration `i` draws from stream `i` of a
/// generator seeded with `seed`, so results do not depend on scheduling.
pub fn bootstrap<D, F>(data: &[D], metric: F, iterations: usize, seed: u64) -> Result<BootstrapSummary, EvalError>
where
    D: Clone + Send + Sync,
    F: Fn(&[D]) -> Option<f64> + Sync,
{
    if data.is_empty() {
        return Err(EvalError::Empty);
    }
    if iterations == 0 {
        return Err(EvalError::Invalid("bootstrap needs at least one iteration".into()));
    }
    let values: Vec<Option<f64>> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<D> = (0..data.len())
                .map(|_| data[rng.random_range(0..data.len())].clone())
                .collect();
            metric(&sample).filter(|v| v.is_finite())
        })
        .collect();
    let mut kept: Vec<f64> = values.iter().flatten().copied().collect();
    let skipped = iterations - kept.len();
    if kept.is_empty() {
        return Err(EvalError::Invalid("metric undefined on every resample".into()));
    }
    let n = kept.len() as f64;
    let constant = kept.iter().all(|&v| v == kept[0]);
    let mean = if constant {
        kept[0]
    } else {
        kept.iter().sum::<f64>() / n
    };
    let std = if kept.len() > 1 && !constant {
        (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    kept.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(BootstrapSummary {
        mean,
        std,
        ci_low: percentile(&kept, 0.025),
        ci_high: percentile(&kept, 0.975),
        used: kept.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> Option<f64> {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert!((percentile(&v, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_is_degenerate() {
        let s = bootstrap(&[1.0, 2.0, 3.0], |_| Some(0.7), 50, 1).unwrap();
        assert_eq!((s.std, s.ci_low, s.ci_high, s.mean), (0.0, 0.7, 0.7, 0.7));
    }

    #[test]
    fn same_seed_same_summary() {
        let data: Vec<f64> = (0..40).map(|i| (i * 7 % 13) as f64).collect();
        let a = bootstrap(&data, mean, 200, 9).unwrap();
        let b = bootstrap(&data, mean, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(&data, mean, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn undefined_resamples_are_skipped() {
        let data = [0.0, 1.0];
        let s = bootstrap(&data, |v| if v[0] == v[1] { None } else { Some(1.0) }, 100, 3).unwrap();
        assert!(s.skipped > 0);
        assert_eq!(s.used + s.skipped, 100);
    }

    #[test]
    fn errors() {
        assert!(matches!(bootstrap::<f64, _>(&[], mean, 10, 0), Err(EvalError::Empty)));
        assert!(bootstrap(&[1.0], mean, 0, 0).is_err());
    }
}
