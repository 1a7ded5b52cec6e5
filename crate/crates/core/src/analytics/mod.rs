//! Estimates and scores.

pub mod estimate;
pub mod probes;
pub mod relation;
pub mod scores;

pub use estimate::{Branch, BranchCounts, EstimateError, PairEstimate, binomial_se, estimate_pair};
pub use probes::{
    ProbeLabel, ProbeMessage, ProbeReport, ProbeRules, classify_question_unit, extract_question_units,
};
pub use relation::{
    AdvantageMatrix, RelationGraph, edge_curve, equivalence_classes, relation_at_epsilon,
    transitivity_violations,
};
pub use scores::{
    AcceptTable, CellCounts, FdScore, ModelScore, RateTable, ScoreError, ScoreTable, SelfPool,
    fd_turing_scores, round3, turing_scores, turing_scores_from_rates,
};
