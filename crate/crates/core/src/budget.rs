//! Cooperative per-piece resource limits.
//!
//! Long-running kernels call [`Budget::check_time`] at row granularity and
//! [`Budget::reserve`] before large allocations. Nothing is interrupted
//! asynchronously.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);
pub const DEFAULT_MEMORY_LIMIT: u64 = 32 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Time,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("resource budget exceeded ({resource:?}): {detail}")]
pub struct BudgetExceeded {
    pub resource: Resource,
    pub detail: String,
}

#[derive(Debug)]
pub struct Budget {
    start: Instant,
    time_limit: Option<Duration>,
    memory_limit: Option<u64>,
    peak_reserved: AtomicU64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(Some(DEFAULT_TIME_LIMIT), Some(DEFAULT_MEMORY_LIMIT))
    }
}

impl Budget {
    pub fn new(time_limit: Option<Duration>, memory_limit: Option<u64>) -> Self {
        Budget {
            start: Instant::now(),
            time_limit,
            memory_limit,
            peak_reserved: AtomicU64::new(0),
        }
    }

    pub fn unlimited() -> Self {
        Budget::new(None, None)
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    /// Largest single allocation requested through [`Budget::reserve`].
    pub fn peak_reserved(&self) -> u64 {
        self.peak_reserved.load(Ordering::Relaxed)
    }

    pub fn check_time(&self) -> Result<(), BudgetExceeded> {
        match self.time_limit {
            Some(limit) if self.start.elapsed() > limit => Err(BudgetExceeded {
                resource: Resource::Time,
                detail: format!("elapsed time exceeded {:.3} s", limit.as_secs_f64()),
            }),
            _ => Ok(()),
        }
    }

    /// Announces an allocation of `bytes`; fails if it alone exceeds the cap.
    pub fn reserve(&self, bytes: u64) -> Result<(), BudgetExceeded> {
        self.peak_reserved.fetch_max(bytes, Ordering::Relaxed);
        match self.memory_limit {
            Some(limit) if bytes > limit => Err(BudgetExceeded {
                resource: Resource::Memory,
                detail: format!("allocation of {bytes} bytes exceeds the {limit}-byte cap"),
            }),
            _ => Ok(()),
        }
    }
}
