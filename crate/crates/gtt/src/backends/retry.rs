//! Retry schedule for remote calls.

use std::sync::Mutex;
use std::time::Duration;

use gtt_core::protocol::{AgentFailure, AttemptLog, FailureClass};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub request_timeout_secs: u64,
    pub base_ms: u64,
    pub factor: f64,
    pub cap_ms: u64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub transient_classes: Vec<FailureClass>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            request_timeout_secs: 480,
            base_ms: 1_000,
            factor: 2.0,
            cap_ms: 60_000,
            max_retries: 6,
            transient_classes: vec![
                FailureClass::Timeout,
                FailureClass::Connection,
                FailureClass::RateLimited,
                FailureClass::Server,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("request timeout must be positive")]
    Timeout,
    #[error("backoff must start positive and grow (base > 0, factor > 1, cap >= base)")]
    Schedule,
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.request_timeout_secs == 0 {
            return Err(PolicyError::Timeout);
        }
        if self.base_ms == 0 || self.factor.is_nan() || self.factor <= 1.0 || self.cap_ms < self.base_ms {
            return Err(PolicyError::Schedule);
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }

    /// Upper end of the jitter window before retry `retry` (0-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        let ms = self.base_ms as f64 * self.factor.powi(retry.min(64) as i32);
        Duration::from_millis(ms.min(self.cap_ms as f64) as u64)
    }

    /// Full jitter: uniform on `[0, ceiling(retry)]`.
    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let c = self.ceiling(retry).as_millis() as u64;
        Duration::from_millis(rng.random_range(0..=c))
    }

    pub fn is_transient(&self, class: FailureClass) -> bool {
        self.transient_classes.contains(&class)
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested sleeps without sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    slept: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
    }
}

/// A failed attempt as seen by [`with_retries`].
#[derive(Debug, Clone)]
pub struct AttemptError {
    pub class: FailureClass,
    pub status: Option<u16>,
    pub detail: String,
}

/// Runs `op` until it succeeds, fails persistently or the retry budget is
/// spent. The log holds one entry per attempt, successful one included.
pub fn with_retries<T, R: Rng + ?Sized>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    rng: &mut R,
    mut op: impl FnMut(u32) -> Result<(T, Option<u16>), AttemptError>,
) -> (Result<T, AgentFailure>, Vec<AttemptLog>) {
    let mut log = Vec::new();
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Ok((v, status)) => {
                log.push(AttemptLog { attempt, status, class: None, detail: "ok".into(), backoff_ms: 0 });
                return (Ok(v), log);
            }
            Err(e) => {
                let retry = attempt - 1;
                let again = policy.is_transient(e.class) && retry < policy.max_retries;
                let wait = if again { policy.delay(retry, rng) } else { Duration::ZERO };
                log.push(AttemptLog {
                    attempt,
                    status: e.status,
                    class: Some(e.class),
                    detail: e.detail.clone(),
                    backoff_ms: wait.as_millis() as u64,
                });
                if !again {
                    let mut failure = AgentFailure::new(e.class, e.detail);
                    failure.attempts = log.clone();
                    return (Err(failure), log);
                }
                sleeper.sleep(wait);
                attempt += 1;
            }
        }
    }
}
