use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, Embedder, EmbeddingVector, PromptRequest, ProviderError, ProviderResponse};

/// Exponential backoff on rate limits and timeouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    /// Per-request timeout handed to HTTP transports.
    #[serde(with = "millis")]
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// Same attempt budget, no sleeping. For tests and replay.
    pub fn immediate() -> Self {
        Self {
            base_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    /// Sleep before attempt `n` (1-based): nothing before the first, then
    /// base, 2·base, 4·base, ...
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        self.base_delay.saturating_mul(1u32 << (attempt - 2).min(20))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Calls `attempt` until it succeeds, fails for good, or the budget runs out.
/// Returns the value and the number of attempts used.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    mut attempt: impl FnMut(u32) -> Result<T, ProviderError>,
) -> Result<(T, u32), ProviderError> {
    let max = policy.max_attempts.max(1);
    let mut n = 1;
    loop {
        std::thread::sleep(policy.delay_before(n));
        match attempt(n) {
            Ok(v) => return Ok((v, n)),
            Err(e) if e.is_retryable() && n < max => {
                tracing::warn!(attempt = n, error = %e, "retrying");
                n += 1;
            }
            Err(e) if e.is_retryable() => {
                return Err(ProviderError::RetriesExhausted {
                    attempts: n,
                    status: e.status(),
                    message: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Wraps a single-attempt transport with a [`RetryPolicy`].
#[derive(Debug, Clone)]
pub struct Retrying<T> {
    inner: T,
    policy: RetryPolicy,
}

impl<T> Retrying<T> {
    pub fn new(inner: T, policy: RetryPolicy) -> Self {
        Self { inner, policy }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: ChatProvider> ChatProvider for Retrying<T> {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let (mut resp, attempts) = with_retry(&self.policy, |_| self.inner.complete(req))?;
        resp.attempts = attempts;
        Ok(resp)
    }

    fn context_window(&self) -> Option<usize> {
        self.inner.context_window()
    }
}

impl<T: Embedder> Embedder for Retrying<T> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        with_retry(&self.policy, |_| self.inner.embed(text)).map(|(v, _)| v)
    }
}
