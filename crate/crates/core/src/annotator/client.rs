//! LLM endpoint contract and request pacing.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    /// Frame references in temporal order.
    pub image_refs: Vec<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl LlmResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    /// Worth retrying: timeouts, rate limits, 5xx.
    #[error("transient endpoint error: {0}")]
    Transient(String),
    /// Retrying will not help: bad request, auth failure.
    #[error("permanent endpoint error: {0}")]
    Permanent(String),
}

/// Anything that turns a request into a response.
pub trait LlmClient: Send + Sync {
    fn submit(&self, request: &LlmRequest) -> Result<LlmResponse, ClientError>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn submit(&self, request: &LlmRequest) -> Result<LlmResponse, ClientError> {
        (**self).submit(request)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for Box<C> {
    fn submit(&self, request: &LlmRequest) -> Result<LlmResponse, ClientError> {
        (**self).submit(request)
    }
}

/// Token bucket shared by all workers: `burst` requests may go at once, then
/// one request per `60 / per_minute` seconds.
pub struct RateLimiter {
    state: Mutex<Bucket>,
    per_sec: f64,
    burst: f64,
}

struct Bucket {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    pub fn new(per_minute: f64, burst: u32) -> Self {
        let burst = burst.max(1) as f64;
        Self {
            state: Mutex::new(Bucket {
                tokens: burst,
                last: Instant::now(),
            }),
            per_sec: per_minute / 60.0,
            burst,
        }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut b = self.state.lock().expect("rate limiter lock");
                let now = Instant::now();
                b.tokens = (b.tokens + now.duration_since(b.last).as_secs_f64() * self.per_sec).min(self.burst);
                b.last = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                (1.0 - b.tokens) / self.per_sec
            };
            thread::sleep(Duration::from_secs_f64(wait.min(60.0)));
        }
    }
}

/// Delay before retry number `attempt` (1-based): `base * 2^(attempt-1)`,
/// capped at `max`.
pub fn backoff_delay(base: Duration, max: Duration, attempt: u32) -> Duration {
    let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
    base.saturating_mul(factor).min(max)
}
