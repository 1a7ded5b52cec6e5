//! Per-pair success estimates and their standard errors.

use serde::{Deserialize, Serialize};

use crate::protocol::{ParsedAnswer, SecretIdentity};

/// Branch tallies for one ordered (actor, target) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    /// Verdict 0 while facing the imitator.
    pub imit_correct: u64,
    /// Verdict 1 while facing the imitator.
    pub imit_fooled: u64,
    /// Verdict 1 while facing the target.
    pub self_correct: u64,
    /// Verdict 0 while facing the target.
    pub self_wrong: u64,
    /// Trials without a verdict; excluded from every fraction.
    pub unparseable: u64,
    /// Analyzable trials whose verdict came in the opening message.
    pub opening: u64,
}

impl BranchCounts {
    pub fn add(&mut self, secret: SecretIdentity, parsed: ParsedAnswer) {
        if matches!(parsed, ParsedAnswer::OpeningAnswer { .. }) {
            self.opening += 1;
        }
        match (secret, parsed.bit()) {
            (_, None) => self.unparseable += 1,
            (SecretIdentity::Imitator, Some(false)) => self.imit_correct += 1,
            (SecretIdentity::Imitator, Some(true)) => self.imit_fooled += 1,
            (SecretIdentity::Target, Some(true)) => self.self_correct += 1,
            (SecretIdentity::Target, Some(false)) => self.self_wrong += 1,
        }
    }

    pub fn merge(&mut self, other: &BranchCounts) {
        self.imit_correct += other.imit_correct;
        self.imit_fooled += other.imit_fooled;
        self.self_correct += other.self_correct;
        self.self_wrong += other.self_wrong;
        self.unparseable += other.unparseable;
        self.opening += other.opening;
    }

    pub fn n_imit(&self) -> u64 {
        self.imit_correct + self.imit_fooled
    }

    pub fn n_self(&self) -> u64 {
        self.self_correct + self.self_wrong
    }

    pub fn analyzable(&self) -> u64 {
        self.n_imit() + self.n_self()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EstimateError {
    #[error("no analyzable trials in the {0} branch")]
    EmptyBranch(Branch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Imitator,
    Target,
}

impl core::fmt::Display for Branch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Branch::Imitator => "imitator",
            Branch::Target => "target",
        })
    }
}

/// Empirical success of the distinguisher in one ordered cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    /// Pr[verdict 1 | facing the target].
    pub s_hat_self: f64,
    /// Pr[verdict 0 | facing the imitator].
    pub s_hat_imit: f64,
    pub p_hat: f64,
    pub d_hat: f64,
    pub n_self: u64,
    pub n_imit: u64,
    /// Plug-in standard error of `p_hat`.
    pub se: f64,
    /// Worst case over branch proportions for the same branch sizes.
    pub se_worst: f64,
}

pub fn estimate_pair(counts: &BranchCounts) -> Result<PairEstimate, EstimateError> {
    let n_imit = counts.n_imit();
    let n_self = counts.n_self();
    if n_imit == 0 {
        return Err(EstimateError::EmptyBranch(Branch::Imitator));
    }
    if n_self == 0 {
        return Err(EstimateError::EmptyBranch(Branch::Target));
    }
    let s_imit = counts.imit_correct as f64 / n_imit as f64;
    let s_self = counts.self_correct as f64 / n_self as f64;
    let p_hat = 0.5 * s_imit + 0.5 * s_self;
    let (ni, ns) = (n_imit as f64, n_self as f64);
    let se = 0.5 * libm::sqrt(s_imit * (1.0 - s_imit) / ni + s_self * (1.0 - s_self) / ns);
    let se_worst = 0.5 * libm::sqrt(0.25 / ni + 0.25 / ns);
    Ok(PairEstimate {
        s_hat_self: s_self,
        s_hat_imit: s_imit,
        p_hat,
        d_hat: p_hat - 0.5,
        n_self,
        n_imit,
        se,
        se_worst,
    })
}

/// Binomial standard error.
///
/// Single branch: `√(p(1−p)/n)`. Combined: the worst case for `½p₁ + ½p₂`
/// with `n` trials per branch, `1/√(8n)`, independent of `p`.
pub fn binomial_se(p_hat: f64, n: u64, combined: bool) -> f64 {
    let n = n.max(1) as f64;
    if combined {
        1.0 / libm::sqrt(8.0 * n)
    } else {
        libm::sqrt((p_hat * (1.0 - p_hat)).max(0.0) / n)
    }
}
