//! Statistical (L1) distance between tabular agents.

use alloc::vec::Vec;

use crate::tabular::{ROW_TOLERANCE, Symbol, TabularAgent, TabularError};

/// Finite distribution over context strings.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDist {
    entries: Vec<(Vec<Symbol>, f64)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("agents have different output alphabets")]
    AlphabetMismatch,
    #[error("context distribution must be non-negative and sum to 1 (sum {0})")]
    BadContextDist(f64),
    #[error(transparent)]
    Table(#[from] TabularError),
}

impl ContextDist {
    pub fn new(entries: Vec<(Vec<Symbol>, f64)>) -> Result<Self, DistanceError> {
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        if entries.iter().any(|(_, p)| !p.is_finite() || *p < 0.0)
            || libm::fabs(sum - 1.0) > ROW_TOLERANCE
        {
            return Err(DistanceError::BadContextDist(sum));
        }
        Ok(ContextDist { entries })
    }

    /// Uniform over the given contexts.
    pub fn uniform(contexts: Vec<Vec<Symbol>>) -> Result<Self, DistanceError> {
        let w = 1.0 / contexts.len() as f64;
        Self::new(contexts.into_iter().map(|c| (c, w)).collect())
    }

    pub fn point(context: Vec<Symbol>) -> Self {
        ContextDist { entries: alloc::vec![(context, 1.0)] }
    }

    pub fn entries(&self) -> &[(Vec<Symbol>, f64)] {
        &self.entries
    }
}

fn same_alphabet(p: &TabularAgent, q: &TabularAgent) -> bool {
    let mut a = p.outputs().to_vec();
    let mut b = q.outputs().to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Unnormalized L1 distance of one context's rows, in `[0, 2]`.
pub fn row_l1(p: &TabularAgent, q: &TabularAgent, context: &[Symbol]) -> Result<f64, DistanceError> {
    if !same_alphabet(p, q) {
        return Err(DistanceError::AlphabetMismatch);
    }
    let mut total = 0.0;
    for x in p.outputs() {
        total += libm::fabs(p.prob(context, *x)? - q.prob(context, *x)?);
    }
    Ok(total)
}

/// Σ_y D(y) Σ_x |P(x|y) − Q(x|y)|.
pub fn l1_distance(p: &TabularAgent, q: &TabularAgent, d: &ContextDist) -> Result<f64, DistanceError> {
    let mut total = 0.0;
    for (y, w) in d.entries() {
        if *w > 0.0 {
            total += w * row_l1(p, q, y)?;
        }
    }
    Ok(total)
}

/// Worst case over context distributions supported on `p`'s domain: the
/// largest single-row distance.
pub fn max_l1(p: &TabularAgent, q: &TabularAgent) -> Result<f64, DistanceError> {
    let mut worst: f64 = 0.0;
    for y in p.contexts() {
        worst = worst.max(row_l1(p, q, y)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(rows: &[(&[u16], [f64; 2])]) -> TabularAgent {
        TabularAgent::new(
            1,
            vec![Symbol::message(0), Symbol::message(1)],
            rows.iter().map(|(c, r)| (c.iter().map(|i| Symbol::message(*i)).collect(), r.to_vec())),
        )
        .unwrap()
    }

    #[test]
    fn identity_and_disjoint() {
        let p = t(&[(&[], [1.0, 0.0])]);
        let q = t(&[(&[], [0.0, 1.0])]);
        let d = ContextDist::point(vec![]);
        assert_eq!(l1_distance(&p, &p, &d).unwrap(), 0.0);
        assert_eq!(l1_distance(&p, &q, &d).unwrap(), 2.0);
    }

    #[test]
    fn alphabet_mismatch() {
        let p = t(&[(&[], [1.0, 0.0])]);
        let q = TabularAgent::new(0, vec![Symbol::message(5)], [(vec![], vec![1.0])]).unwrap();
        assert_eq!(
            l1_distance(&p, &q, &ContextDist::point(vec![])).unwrap_err(),
            DistanceError::AlphabetMismatch
        );
    }
}
