//! Seeded suites of theorem instances and protocol-vs-enumeration checks,
//! parallel across instances.

use gtt_core::analytics::estimate_pair;
use gtt_core::seed;
use gtt_core::theory::bounds::{BoundInstance, BoundReport, TheoremId, verify_bound};
use gtt_core::theory::construct::{random_p1, random_t2, random_t3, random_t4, t3_for_epsilon};
use gtt_core::theory::oracle::OracleInstance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub fn parse_theorem(s: &str) -> Option<TheoremId> {
    match s.to_ascii_uppercase().as_str() {
        "P1" => Some(TheoremId::P1),
        "T2" => Some(TheoremId::T2),
        "T3" => Some(TheoremId::T3),
        "T4" => Some(TheoremId::T4),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub theorem: TheoremId,
    pub instances: u64,
    pub seed: u64,
    /// T3: build instances with α = ε²/4, β = γ = δ = ε/4, ζ = ε.
    pub epsilon: Option<f64>,
    /// T4: fixed ζ.
    pub zeta: Option<f64>,
}

impl SuiteOptions {
    pub fn new(theorem: TheoremId, instances: u64, seed: u64) -> Self {
        SuiteOptions { theorem, instances, seed, epsilon: None, zeta: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceFailure {
    pub index: u64,
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub theorem: TheoremId,
    pub instances: u64,
    /// Instances satisfying the bound as stated.
    pub holds: u64,
    /// Instances satisfying the re-derived bound, where one exists.
    pub holds_derived: Option<u64>,
    pub worst_slack: f64,
    pub worst_derived_slack: Option<f64>,
    /// Instances rejected by hypothesis checks or failing to enumerate.
    pub errors: Vec<InstanceFailure>,
    /// Instances violating the stated bound.
    pub violations: Vec<InstanceFailure>,
}

impl SuiteReport {
    pub fn all_hold(&self) -> bool {
        self.errors.is_empty() && self.holds == self.instances
    }

    pub fn all_hold_derived(&self) -> bool {
        self.errors.is_empty() && self.holds_derived.unwrap_or(self.holds) == self.instances
    }
}

pub fn instance(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Result<BoundInstance, String> {
    let r = match opts.theorem {
        TheoremId::P1 => random_p1(rng).map(BoundInstance::P1),
        TheoremId::T2 => random_t2(rng, None).map(BoundInstance::T2),
        TheoremId::T3 => match opts.epsilon {
            Some(e) => t3_for_epsilon(rng, e).map(BoundInstance::T3),
            None => random_t3(rng).map(BoundInstance::T3),
        },
        TheoremId::T4 => random_t4(rng, opts.zeta).map(BoundInstance::T4),
    };
    r.map_err(|e| e.to_string())
}

pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let results: Vec<(u64, u64, Result<BoundReport, String>)> = (0..opts.instances)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive(opts.seed, &[i]);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let r = instance(opts, &mut rng).and_then(|inst| verify_bound(&inst).map_err(|e| e.to_string()));
            (i, s, r)
        })
        .collect();
    let mut rep = SuiteReport {
        theorem: opts.theorem,
        instances: opts.instances,
        holds: 0,
        holds_derived: None,
        worst_slack: f64::INFINITY,
        worst_derived_slack: None,
        errors: Vec::new(),
        violations: Vec::new(),
    };
    for (index, seed, r) in results {
        match r {
            Err(detail) => rep.errors.push(InstanceFailure { index, seed, detail }),
            Ok(b) => {
                rep.worst_slack = rep.worst_slack.min(b.slack);
                if b.holds {
                    rep.holds += 1;
                } else {
                    rep.violations.push(InstanceFailure {
                        index,
                        seed,
                        detail: format!("lhs {} > rhs {}; measured {:?}", b.lhs, b.rhs, b.measured),
                    });
                }
                if let (Some(d), Some(ok)) = (b.derived_rhs, b.holds_derived) {
                    *rep.holds_derived.get_or_insert(0) += u64::from(ok);
                    let s = d - b.lhs;
                    rep.worst_derived_slack = Some(rep.worst_derived_slack.map_or(s, |w: f64| w.min(s)));
                }
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub index: u64,
    pub exact: f64,
    pub p_hat: f64,
    pub se: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub instances: u64,
    pub trials: u64,
    pub within: u64,
    pub rows: Vec<OracleRow>,
}

/// Plays each random instance `trials` times through the protocol engine and
/// compares the success rate with the enumerated probability.
pub fn run_oracle(instances: u64, trials: u64, base_seed: u64) -> Result<OracleReport, String> {
    let rows: Vec<OracleRow> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, &[i, 0]));
            let inst = OracleInstance::random(&mut rng);
            let exact = inst.exact().map_err(|e| e.to_string())?;
            let counts = inst.simulate(trials, seed::derive(base_seed, &[i, 1]));
            let est = estimate_pair(&counts).map_err(|e| e.to_string())?;
            let se = est.se.max(1e-9);
            Ok(OracleRow { index: i, exact, p_hat: est.p_hat, se, within_3se: (est.p_hat - exact).abs() <= 3.0 * se })
        })
        .collect::<Result<_, String>>()?;
    let within = rows.iter().filter(|r| r.within_3se).count() as u64;
    Ok(OracleReport { instances, trials, within, rows })
}
