use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ProviderError;

/// Bounded exponential backoff: attempt `i` (0-based) that fails
/// transiently waits `min(base * 2^i, max)` before the next try.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Runs `op` until it succeeds, fails permanently, or the retry budget is
/// spent. Returns the value with the number of attempts made.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Result<T, ProviderError>,
) -> Result<(T, u32), ProviderError> {
    let mut attempt = 0u32;
    loop {
        match op(attempt) {
            Ok(v) => return Ok((v, attempt + 1)),
            Err(e) if e.is_transient() && attempt < policy.max_retries => {
                let delay = policy.delay_for(attempt);
                log::debug!("attempt {} failed ({e}); retrying in {:?}", attempt + 1, delay);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                attempt += 1;
            }
            Err(e) if e.is_transient() => {
                let attempts = attempt + 1;
                return Err(match e {
                    ProviderError::Transient { status: 429, .. } => ProviderError::RateLimitExhausted { attempts },
                    other => ProviderError::RetriesExhausted {
                        attempts,
                        last: other.to_string(),
                    },
                });
            }
            Err(e) => return Err(e),
        }
    }
}
