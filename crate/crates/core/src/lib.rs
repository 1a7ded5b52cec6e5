//! Core of the generalized Turing test (GTT) engine.
//!
//! Everything in this crate is pure computation and builds without `std`:
//!
//! - [`protocol`]: prompt templates, answer parsing and the single-trial state
//!   machine for every protocol variant (GTT, GTTQ, fixed distinguisher,
//!   controlled budgets, querying distinguisher).
//! - [`agents`]: deterministic scripted agents and tabular probabilistic agents
//!   that plug into the trial state machine.
//! - [`tabular`]: finite-support agents (context key -> distribution over
//!   symbols) and seeded sampling.
//! - [`analytics`]: pair estimates, standard errors, Turing scores, comparator
//!   graphs, transitivity diagnostics and distinguisher question probes.
//! - [`theory`]: exact enumeration of game success probabilities and checks of
//!   the comparator bounds on small synthetic agents.
//!
//! Network transport, persistence and the HTTP arena live in the `gtt` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod analytics;
pub mod protocol;
pub mod seed;
pub mod tabular;
pub mod theory;

pub use protocol::{
    Agent, AgentFailure, ChatRole, ChatTurn, Clock, ParsedAnswer, ProtocolVariant, Roster, Seat,
    SecretIdentity, TrialConfig, TrialRecord, run_trial,
};
pub use tabular::{Symbol, TabularAgent, TabularError};
