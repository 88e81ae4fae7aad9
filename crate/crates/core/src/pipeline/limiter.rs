//! Sliding-window rate limiter over an injected clock.
//!
//! A request at `now` is granted iff fewer than `capacity` grants fall in the
//! half-open window `(now - window, now]`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimiterConfig {
    pub capacity_per_window: u32,
    #[serde(with = "secs")]
    pub window: Duration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for RateLimiterConfig {
    fn default() -> Self {
        RateLimiterConfig {
            capacity_per_window: 100,
            window: Duration::from_secs(60),
        }
    }
}

impl RateLimiterConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.capacity_per_window == 0 || self.window.is_zero() {
            return Err(PipelineError::InvalidConfig(
                "rate limiter needs capacity >= 1 and a positive window".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "permit")]
pub enum Permit {
    Granted,
    RetryAfter {
        #[serde(with = "secs")]
        after: Duration,
    },
}

impl Permit {
    pub fn is_granted(&self) -> bool {
        matches!(self, Permit::Granted)
    }
}

/// Time source measured as an offset from an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

/// Manually advanced clock for tests and simulations.
#[derive(Debug, Default)]
pub struct VirtualClock {
    nanos: AtomicU64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        self.nanos.fetch_add(by.as_nanos() as u64, Ordering::SeqCst);
    }

    pub fn set(&self, to: Duration) {
        self.nanos.store(to.as_nanos() as u64, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
    }
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Shared limiter; grants are atomic under the internal lock.
#[derive(Debug)]
pub struct SlidingWindowLimiter {
    config: RateLimiterConfig,
    grants: Mutex<VecDeque<Duration>>,
}

impl SlidingWindowLimiter {
    pub fn new(config: RateLimiterConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(SlidingWindowLimiter {
            config,
            grants: Mutex::new(VecDeque::new()),
        })
    }

    pub fn config(&self) -> RateLimiterConfig {
        self.config
    }

    pub fn acquire_permit(&self, now: Duration) -> Permit {
        let mut grants = self.grants.lock().expect("limiter lock");
        // Grants at or before now - window have left the window.
        while let Some(&t) = grants.front() {
            if t + self.config.window <= now {
                grants.pop_front();
            } else {
                break;
            }
        }
        let in_window = grants.iter().filter(|&&t| t <= now).count();
        if in_window < self.config.capacity_per_window as usize {
            // Keep the queue sorted even if callers present out-of-order times.
            let pos = grants.partition_point(|&t| t <= now);
            grants.insert(pos, now);
            Permit::Granted
        } else {
            let oldest = grants[in_window - self.config.capacity_per_window as usize];
            Permit::RetryAfter {
                after: oldest + self.config.window - now,
            }
        }
    }

    /// Wait on `clock` until a permit is granted, sleeping via `sleep`.
    pub fn acquire_with<S: FnMut(Duration)>(&self, clock: &dyn Clock, mut sleep: S) -> Duration {
        loop {
            let now = clock.now();
            match self.acquire_permit(now) {
                Permit::Granted => return now,
                Permit::RetryAfter { after } => sleep(after),
            }
        }
    }
}
