//! Fooling, distinguishing and Turing scores over a model universe.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::estimate::{BranchCounts, EstimateError, estimate_pair};

/// Where `ŝ_A` (A recognising a fresh copy of itself) comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfPool {
    /// The target branch of A's self-pair cell only.
    #[default]
    SelfPairCell,
    /// Target branches of every cell where A is target; all of them are A
    /// judging a fresh A.
    AllTargetBranches,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("universe needs at least {needed} models, got {got}")]
    UniverseTooSmall { needed: usize, got: usize },
    #[error("missing cells: {0:?}")]
    MissingCells(Vec<(String, String)>),
    #[error("missing accept probabilities for (judge, interlocutor, named): {0:?}")]
    MissingAccept(Vec<(String, String, String)>),
    #[error("cell ({actor}, {target}): {source}")]
    Estimate { actor: String, target: String, source: EstimateError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    /// Average fooling score.
    pub f: f64,
    /// Average distinguishing score.
    pub d: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub universe: usize,
    pub self_pool: SelfPool,
    pub rows: Vec<ModelScore>,
}

/// Counts keyed by (actor, target).
pub type CellCounts = BTreeMap<(String, String), BranchCounts>;

fn key(a: &str, b: &str) -> (String, String) {
    (String::from(a), String::from(b))
}

/// Branch success rates: `s_self[A]` = ŝ_A and `s_imit[(A, B)]` = ŝ_{B,A},
/// the rejection rate of judge B against actor A imitating it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub s_self: BTreeMap<String, f64>,
    pub s_imit: BTreeMap<(String, String), f64>,
}

/// F(A) = mean_{B≠A} (1 − ŝ_{B,A}), D(A) = ½ŝ_A + ½·mean_{B≠A} ŝ_{A,B}.
pub fn turing_scores_from_rates(models: &[String], rates: &RateTable) -> Result<Vec<ModelScore>, ScoreError> {
    if models.len() < 2 {
        return Err(ScoreError::UniverseTooSmall { needed: 2, got: models.len() });
    }
    let mut missing = Vec::new();
    for a in models {
        if !rates.s_self.contains_key(a) {
            missing.push(key(a, a));
        }
        for b in models.iter().filter(|b| *b != a) {
            if !rates.s_imit.contains_key(&key(a, b)) {
                missing.push(key(a, b));
            }
        }
    }
    if !missing.is_empty() {
        return Err(ScoreError::MissingCells(missing));
    }
    let others = (models.len() - 1) as f64;
    Ok(models
        .iter()
        .map(|a| {
            let mut fool = 0.0;
            let mut judge = 0.0;
            for b in models.iter().filter(|b| *b != a) {
                fool += 1.0 - rates.s_imit[&key(a, b)];
                judge += rates.s_imit[&key(b, a)];
            }
            let f = fool / others;
            let d = 0.5 * rates.s_self[a] + 0.5 * judge / others;
            ModelScore { model: a.clone(), f, d, t: 0.5 * f + 0.5 * d }
        })
        .collect())
}

/// Scores from per-cell counts (actor, target). Every ordered cell, self-pairs
/// included, must be present.
pub fn turing_scores(
    models: &[String],
    cells: &CellCounts,
    pool: SelfPool,
) -> Result<ScoreTable, ScoreError> {
    if models.len() < 2 {
        return Err(ScoreError::UniverseTooSmall { needed: 2, got: models.len() });
    }
    let mut missing = Vec::new();
    for a in models {
        for b in models {
            if !cells.contains_key(&key(a, b)) {
                missing.push(key(a, b));
            }
        }
    }
    if !missing.is_empty() {
        return Err(ScoreError::MissingCells(missing));
    }
    let est = |a: &String, b: &String| {
        estimate_pair(&cells[&key(a, b)]).map_err(|source| ScoreError::Estimate {
            actor: a.clone(),
            target: b.clone(),
            source,
        })
    };
    let mut rates = RateTable::default();
    for a in models {
        let own = est(a, a)?;
        let s_self = match pool {
            SelfPool::SelfPairCell => own.s_hat_self,
            SelfPool::AllTargetBranches => {
                let mut merged = BranchCounts::default();
                for x in models {
                    merged.merge(&cells[&key(x, a)]);
                }
                merged.self_correct as f64 / merged.n_self() as f64
            }
        };
        rates.s_self.insert(a.clone(), s_self);
        for b in models.iter().filter(|b| *b != a) {
            rates.s_imit.insert(key(a, b), est(a, b)?.s_hat_imit);
        }
    }
    let rows = turing_scores_from_rates(models, &rates)?;
    Ok(ScoreTable { universe: models.len(), self_pool: pool, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdScore {
    pub judge: String,
    pub actor: String,
    pub f: f64,
    /// Resistance to imitation.
    pub r: f64,
    pub t: f64,
}

/// Acceptance probabilities `q_{D,X,Y}` keyed by (judge, interlocutor, named).
pub type AcceptTable = BTreeMap<(String, String, String), f64>;

/// F_D(A) = mean_{C∉{A,D}} q_{D,A,C}, R_D(A) = mean_{X∉{A,D}} (1 − q_{D,X,A}).
pub fn fd_turing_scores(
    judge: &str,
    models: &[String],
    q: &AcceptTable,
) -> Result<Vec<FdScore>, ScoreError> {
    let pool: Vec<&String> = models.iter().filter(|m| m.as_str() != judge).collect();
    if pool.len() < 2 {
        return Err(ScoreError::UniverseTooSmall { needed: 2, got: pool.len() });
    }
    let k = |x: &str, y: &str| (String::from(judge), String::from(x), String::from(y));
    let mut missing = Vec::new();
    for x in &pool {
        for y in pool.iter().filter(|y| *y != x) {
            if !q.contains_key(&k(x, y)) {
                missing.push(k(x, y));
            }
        }
    }
    if !missing.is_empty() {
        return Err(ScoreError::MissingAccept(missing));
    }
    let others = (pool.len() - 1) as f64;
    Ok(pool
        .iter()
        .map(|a| {
            let mut fool = 0.0;
            let mut resist = 0.0;
            for c in pool.iter().filter(|c| *c != a) {
                fool += q[&k(a, c)];
                resist += 1.0 - q[&k(c, a)];
            }
            let (f, r) = (fool / others, resist / others);
            FdScore { judge: String::from(judge), actor: (*a).clone(), f, r, t: 0.5 * f + 0.5 * r }
        })
        .collect())
}

/// Rounds for display tables; files keep full precision.
pub fn round3(x: f64) -> f64 {
    libm::round(x * 1000.0) / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("m{i}")).collect()
    }

    fn uniform(models: &[String], c: BranchCounts) -> CellCounts {
        let mut out = CellCounts::new();
        for a in models {
            for b in models {
                out.insert(key(a, b), c);
            }
        }
        out
    }

    #[test]
    fn coin_flippers_score_half() {
        let m = names(3);
        let c = BranchCounts { imit_correct: 5, imit_fooled: 5, self_correct: 5, self_wrong: 5, ..Default::default() };
        let t = turing_scores(&m, &uniform(&m, c), SelfPool::SelfPairCell).unwrap();
        for r in &t.rows {
            assert_eq!((r.f, r.d, r.t), (0.5, 0.5, 0.5));
        }
    }

    #[test]
    fn missing_cells_listed() {
        let m = names(2);
        let mut cells = uniform(&m, BranchCounts { imit_correct: 1, self_correct: 1, ..Default::default() });
        cells.remove(&key("m0", "m0"));
        cells.remove(&key("m1", "m0"));
        let err = turing_scores(&m, &cells, SelfPool::SelfPairCell).unwrap_err();
        assert_eq!(err, ScoreError::MissingCells(vec![key("m0", "m0"), key("m1", "m0")]));
    }

    #[test]
    fn directions() {
        // m0 always rejects imitators; m1 never does. Everyone recognises itself.
        let m = names(2);
        let mut cells = CellCounts::new();
        let reject = BranchCounts { imit_correct: 1, self_correct: 1, ..Default::default() };
        let accept = BranchCounts { imit_fooled: 1, self_correct: 1, ..Default::default() };
        cells.insert(key("m0", "m0"), reject);
        cells.insert(key("m1", "m0"), reject);
        cells.insert(key("m0", "m1"), accept);
        cells.insert(key("m1", "m1"), accept);
        let t = turing_scores(&m, &cells, SelfPool::SelfPairCell).unwrap();
        assert_eq!((t.rows[0].f, t.rows[0].d), (1.0, 1.0));
        assert_eq!((t.rows[1].f, t.rows[1].d), (0.0, 0.5));
    }

    #[test]
    fn always_reject_judge() {
        let m = names(4);
        let mut q = AcceptTable::new();
        for x in &m[1..] {
            for y in &m[1..] {
                if x != y {
                    q.insert(("m0".to_string(), x.clone(), y.clone()), 0.0);
                }
            }
        }
        for s in fd_turing_scores("m0", &m, &q).unwrap() {
            assert_eq!((s.f, s.r, s.t), (0.0, 1.0, 0.5));
        }
        q.remove(&("m0".to_string(), "m1".to_string(), "m2".to_string()));
        assert!(matches!(fd_turing_scores("m0", &m, &q), Err(ScoreError::MissingAccept(v)) if v.len() == 1));
    }
}
