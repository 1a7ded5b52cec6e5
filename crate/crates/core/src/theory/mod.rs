//! Exact verification of the comparator's definitions and bounds on small
//! finite agents.
//!
//! Agents are [`TabularAgent`](crate::TabularAgent)s over a handful of symbols;
//! games are enumerated path by path, so every probability is exact up to
//! floating-point summation.

pub mod bounds;
pub mod construct;
pub mod distance;
pub mod enumerate;
pub mod oracle;

pub use bounds::{BoundError, BoundInstance, BoundReport, TheoremId, verify_bound};
pub use distance::{ContextDist, l1_distance};
pub use enumerate::{EnumError, Policy, exact_advantage, exact_gtt_success, verdict_probs};
