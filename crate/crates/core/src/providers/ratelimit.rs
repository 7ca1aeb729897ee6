use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateLimits {
    pub requests_per_minute: u32,
    pub tokens_per_minute: u32,
}

#[derive(Debug)]
struct Buckets {
    requests: f64,
    tokens: f64,
    last: Instant,
}

/// Shared admission control for a provider: two token buckets (requests and
/// tokens per minute) refilled continuously. Callers block in
/// [`RateLimiter::acquire`] until both buckets can pay.
#[derive(Debug)]
pub struct RateLimiter {
    limits: RateLimits,
    state: Mutex<Buckets>,
}

impl RateLimiter {
    pub fn new(limits: RateLimits) -> Self {
        Self::starting_at(limits, Instant::now())
    }

    pub fn starting_at(limits: RateLimits, now: Instant) -> Self {
        Self {
            limits,
            state: Mutex::new(Buckets {
                requests: limits.requests_per_minute as f64,
                tokens: limits.tokens_per_minute as f64,
                last: now,
            }),
        }
    }

    pub fn limits(&self) -> RateLimits {
        self.limits
    }

    /// Tries to admit one request costing `tokens` at time `now`. On refusal
    /// returns how long to wait before the buckets could cover it.
    pub fn try_acquire_at(&self, tokens: u32, now: Instant) -> Result<(), Duration> {
        let rpm = self.limits.requests_per_minute as f64;
        let tpm = self.limits.tokens_per_minute as f64;
        // A request larger than the whole token budget is admitted once the
        // bucket is full.
        let cost = (tokens as f64).min(tpm);
        let mut s = self.state.lock();
        let elapsed = now.saturating_duration_since(s.last).as_secs_f64();
        s.requests = (s.requests + elapsed * rpm / 60.0).min(rpm);
        s.tokens = (s.tokens + elapsed * tpm / 60.0).min(tpm);
        if now > s.last {
            s.last = now;
        }
        if s.requests >= 1.0 && s.tokens >= cost {
            s.requests -= 1.0;
            s.tokens -= cost;
            return Ok(());
        }
        let wait_req = if s.requests >= 1.0 {
            0.0
        } else {
            (1.0 - s.requests) * 60.0 / rpm
        };
        let wait_tok = if s.tokens >= cost {
            0.0
        } else {
            (cost - s.tokens) * 60.0 / tpm
        };
        Err(Duration::from_secs_f64(wait_req.max(wait_tok)))
    }

    pub fn acquire(&self, tokens: u32) {
        loop {
            match self.try_acquire_at(tokens, Instant::now()) {
                Ok(()) => return,
                Err(wait) => std::thread::sleep(wait.max(Duration::from_millis(1))),
            }
        }
    }
}
