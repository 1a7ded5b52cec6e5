//! Std side of the GTT engine: agent backends (remote chat endpoints, human
//! relay), campaign runner and run directories, aggregation and reports,
//! theorem suites and the HTTP arena.
//!
//! Pure game logic lives in [`gtt_core`], re-exported as [`core`].

pub mod aggregate;
pub mod arena;
pub mod backends;
pub mod env;
pub mod report;
pub mod runner;
pub mod theory_lab;

pub use gtt_core as core;

use chrono::{DateTime, Utc};
use gtt_core::Clock;

/// Wall clock.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}
