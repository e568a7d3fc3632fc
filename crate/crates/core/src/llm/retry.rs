use std::time::Duration;

use rand::Rng;

use super::GatewayError;

/// Exponential backoff with multiplicative jitter.
#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    /// Each delay is scaled by a random factor in `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2.0,
            jitter: 0.25,
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Nominal delay before retry number `retry` (1-based), without jitter.
    pub fn base_delay(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry.saturating_sub(1) as i32);
        self.initial_backoff.mul_f64(factor).min(self.max_backoff)
    }

    fn jittered(&self, retry: u32) -> Duration {
        let base = self.base_delay(retry);
        if self.jitter <= 0.0 {
            return base;
        }
        let scale = rand::thread_rng().gen_range((1.0 - self.jitter)..=(1.0 + self.jitter));
        base.mul_f64(scale.max(0.0))
    }

    pub fn run<T>(&self, mut attempt: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let mut tries = 0;
        loop {
            tries += 1;
            match attempt() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && tries < self.max_attempts.max(1) => {
                    let delay = self.jittered(tries);
                    tracing::warn!(error = %e, attempt = tries, ?delay, "retrying chat completion");
                    std::thread::sleep(delay);
                }
                Err(e) => return Err(e),
            }
        }
    }
}
