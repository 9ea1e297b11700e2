//! File formats, configuration, and IO around `sghp-core`.
//!
//! - [`dataset_io`]: line-delimited JSON event-sequence files.
//! - [`spec_io`]: TOML documents describing ground-truth Hawkes specifications.
//! - [`checkpoint`]: JSON model checkpoints (config + named parameter arrays).
//! - [`report`]: training CSV/summary, metrics reports, kernel-grid CSVs.
//! - [`config`]: the run configuration document driving the `sghp` binary.

pub mod checkpoint;
pub mod config;
pub mod dataset_io;
pub mod report;
pub mod spec_io;

use std::time::Instant;

use sghp_core::train::Clock;

/// Wall clock backed by a monotonic [`Instant`].
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        SystemClock(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
