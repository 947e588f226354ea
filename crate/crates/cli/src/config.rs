//! Run configuration: a TOML file of `key = value` lines, overridden by
//! command-line flags.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use scorealign::align::{AlignConfig, Method, OffsetPolicy};
use scorealign::budget::{DEFAULT_MEMORY_LIMIT, DEFAULT_TIME_LIMIT};
use scorealign::dtw::{DistanceFunction, DEFAULT_RADIUS};
use scorealign::pianoroll::DEFAULT_FRAME_PERIOD;
use scorealign::Budget;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub frame_period: f64,
    pub dist: DistanceFunction,
    pub radius: usize,
    pub offsets: OffsetPolicy,
    pub budget_seconds: f64,
    pub budget_bytes: u64,
    pub seed: u64,
    /// Batch worker count; 0 means one per logical core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Eife,
            frame_period: DEFAULT_FRAME_PERIOD,
            dist: DistanceFunction::Cosine,
            radius: DEFAULT_RADIUS,
            offsets: OffsetPolicy::Interp,
            budget_seconds: DEFAULT_TIME_LIMIT.as_secs_f64(),
            budget_bytes: DEFAULT_MEMORY_LIMIT,
            seed: 0,
            jobs: 0,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub method: Option<Method>,
    pub frame_period: Option<f64>,
    pub dist: Option<DistanceFunction>,
    pub radius: Option<usize>,
    pub offsets: Option<OffsetPolicy>,
    pub budget_seconds: Option<f64>,
    pub budget_bytes: Option<u64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain fields always serialize")
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                RunConfig::from_toml(&text)
            }
        }
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, CliError> {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { self.$f = v; })* };
        }
        take!(method, frame_period, dist, radius, offsets, budget_seconds, budget_bytes, seed, jobs);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return Err(CliError::Usage(format!("frame_period must be positive, got {}", self.frame_period)));
        }
        if self.budget_seconds.is_nan() || self.budget_seconds <= 0.0 {
            return Err(CliError::Usage(format!("budget_seconds must be positive, got {}", self.budget_seconds)));
        }
        if self.budget_bytes == 0 {
            return Err(CliError::Usage("budget_bytes must be positive".into()));
        }
        Ok(())
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig {
            frame_period: self.frame_period,
            dist: self.dist,
            radius: self.radius,
            offsets: self.offsets,
            ..AlignConfig::default()
        }
    }

    /// A fresh per-piece budget; an infinite time limit disables the clock.
    pub fn budget(&self) -> Budget {
        let time = self.budget_seconds.is_finite().then(|| Duration::from_secs_f64(self.budget_seconds));
        Budget::new(time, Some(self.budget_bytes))
    }
}
