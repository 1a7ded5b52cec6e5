//! Finite-support agents.
//!
//! A [`TabularAgent`] maps a context (the visible transcript, truncated to the
//! agent's last `depth` symbols) to a probability distribution over a finite
//! output alphabet. Distinguisher tables put mass on the two reserved verdict
//! symbols, which terminate a game.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Rows must sum to one within this tolerance.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// A message or verdict symbol.
///
/// Message symbols are small integers. Two reserved values encode the verdicts
/// "different" (0) and "same" (1), and the high bit marks a message that opens a
/// recursive imitation game.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u16);

impl Symbol {
    const MARK_BIT: u16 = 0x4000;
    pub const VERDICT_DIFFERENT: Symbol = Symbol(0xFF00);
    pub const VERDICT_SAME: Symbol = Symbol(0xFF01);

    pub const fn message(index: u16) -> Symbol {
        assert!(index < Self::MARK_BIT, "message index out of range");
        Symbol(index)
    }

    pub const fn verdict(bit: bool) -> Symbol {
        if bit { Self::VERDICT_SAME } else { Self::VERDICT_DIFFERENT }
    }

    pub const fn is_verdict(self) -> bool {
        self.0 == Self::VERDICT_DIFFERENT.0 || self.0 == Self::VERDICT_SAME.0
    }

    /// `Some(true)` for "same", `Some(false)` for "different".
    pub const fn verdict_bit(self) -> Option<bool> {
        match self {
            Self::VERDICT_SAME => Some(true),
            Self::VERDICT_DIFFERENT => Some(false),
            _ => None,
        }
    }

    pub const fn is_marked(self) -> bool {
        !self.is_verdict() && self.0 & Self::MARK_BIT != 0
    }

    pub const fn marked(self) -> Symbol {
        if self.is_verdict() { self } else { Symbol(self.0 | Self::MARK_BIT) }
    }

    pub const fn unmarked(self) -> Symbol {
        if self.is_verdict() { self } else { Symbol(self.0 & !Self::MARK_BIT) }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.verdict_bit() {
            Some(bit) => write!(f, "<{}>", u8::from(bit)),
            None if self.is_marked() => write!(f, "^{}", self.unmarked().0),
            None => write!(f, "{}", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TabularError {
    #[error("row for context {context:?} sums to {sum}, expected 1")]
    RowSum { context: Vec<Symbol>, sum: f64 },
    #[error("row for context {context:?} has a negative or non-finite entry")]
    BadProbability { context: Vec<Symbol> },
    #[error("row for context {context:?} has {got} entries, output alphabet has {expected}")]
    RowLength { context: Vec<Symbol>, got: usize, expected: usize },
    #[error("context {0:?} is outside the table's domain")]
    UnknownContext(Vec<Symbol>),
    #[error("context {0:?} appears twice")]
    DuplicateContext(Vec<Symbol>),
    #[error("output alphabet is empty or has duplicates")]
    BadAlphabet,
    #[error("output alphabets differ")]
    AlphabetMismatch,
    #[error("context domains differ")]
    DomainMismatch,
    #[error("mixing weight {0} outside [0, 1]")]
    BadWeight(f64),
}

/// Serialized form; validated into a [`TabularAgent`] on load.
#[derive(Serialize, Deserialize)]
struct RawTable {
    depth: usize,
    outputs: Vec<Symbol>,
    rows: Vec<RawRow>,
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    context: Vec<Symbol>,
    probs: Vec<f64>,
}

/// Finite conditional distribution table.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct TabularAgent {
    depth: usize,
    outputs: Vec<Symbol>,
    rows: BTreeMap<Vec<Symbol>, Vec<f64>>,
}

impl TryFrom<RawTable> for TabularAgent {
    type Error = TabularError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        TabularAgent::new(raw.depth, raw.outputs, raw.rows.into_iter().map(|r| (r.context, r.probs)))
    }
}

impl From<TabularAgent> for RawTable {
    fn from(t: TabularAgent) -> Self {
        RawTable {
            depth: t.depth,
            outputs: t.outputs,
            rows: t
                .rows
                .into_iter()
                .map(|(context, probs)| RawRow { context, probs })
                .collect(),
        }
    }
}

impl fmt::Debug for TabularAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabularAgent")
            .field("depth", &self.depth)
            .field("outputs", &self.outputs)
            .field("rows", &self.rows.len())
            .finish()
    }
}

impl TabularAgent {
    /// Builds a table, validating every row.
    pub fn new<I>(depth: usize, outputs: Vec<Symbol>, rows: I) -> Result<Self, TabularError>
    where
        I: IntoIterator<Item = (Vec<Symbol>, Vec<f64>)>,
    {
        if outputs.is_empty() {
            return Err(TabularError::BadAlphabet);
        }
        let mut sorted = outputs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != outputs.len() {
            return Err(TabularError::BadAlphabet);
        }
        let mut table = BTreeMap::new();
        for (context, probs) in rows {
            validate_row(&context, &probs, outputs.len())?;
            if table.insert(context.clone(), probs).is_some() {
                return Err(TabularError::DuplicateContext(context));
            }
        }
        Ok(TabularAgent { depth, outputs, rows: table })
    }

    /// Same row for every context in `contexts`.
    pub fn constant(
        depth: usize,
        outputs: Vec<Symbol>,
        contexts: &[Vec<Symbol>],
        row: &[f64],
    ) -> Result<Self, TabularError> {
        Self::new(depth, outputs, contexts.iter().map(|c| (c.clone(), row.to_vec())))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn outputs(&self) -> &[Symbol] {
        &self.outputs
    }

    pub fn contexts(&self) -> impl Iterator<Item = &[Symbol]> {
        self.rows.keys().map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[Symbol], &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// The lookup key for a full context: its last `depth` symbols.
    pub fn key<'a>(&self, context: &'a [Symbol]) -> &'a [Symbol] {
        &context[context.len().saturating_sub(self.depth)..]
    }

    pub fn row(&self, context: &[Symbol]) -> Result<&[f64], TabularError> {
        let key = self.key(context);
        self.rows
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| TabularError::UnknownContext(key.to_vec()))
    }

    pub fn prob(&self, context: &[Symbol], symbol: Symbol) -> Result<f64, TabularError> {
        let row = self.row(context)?;
        Ok(self
            .outputs
            .iter()
            .position(|s| *s == symbol)
            .map_or(0.0, |i| row[i]))
    }

    /// Non-zero entries of the row for `context`.
    pub fn distribution(
        &self,
        context: &[Symbol],
    ) -> Result<impl Iterator<Item = (Symbol, f64)> + '_, TabularError> {
        let row = self.row(context)?;
        Ok(self
            .outputs
            .iter()
            .copied()
            .zip(row.iter().copied())
            .filter(|(_, p)| *p > 0.0))
    }

    /// Draws one output symbol for `context`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        context: &[Symbol],
        rng: &mut R,
    ) -> Result<Symbol, TabularError> {
        let row = self.row(context)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = None;
        for (sym, p) in self.outputs.iter().zip(row) {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(*sym);
            if u < acc {
                return Ok(*sym);
            }
        }
        // Only reachable through rounding when u is within 1e-9 of 1.
        last.ok_or_else(|| TabularError::RowSum { context: self.key(context).to_vec(), sum: acc })
    }

    /// Row-wise convex combination `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &TabularAgent, weight: f64) -> Result<TabularAgent, TabularError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(TabularError::BadWeight(weight));
        }
        if self.outputs != other.outputs {
            return Err(TabularError::AlphabetMismatch);
        }
        if self.depth != other.depth || !self.rows.keys().eq(other.rows.keys()) {
            return Err(TabularError::DomainMismatch);
        }
        let rows = self.rows.iter().zip(other.rows.values()).map(|((k, a), b)| {
            let row = a
                .iter()
                .zip(b)
                .map(|(x, y)| (1.0 - weight) * x + weight * y)
                .collect();
            (k.clone(), row)
        });
        TabularAgent::new(self.depth, self.outputs.clone(), rows)
    }

    /// Applies `f` to every symbol, in outputs and in context keys.
    pub fn relabel(&self, f: impl Fn(Symbol) -> Symbol) -> Result<TabularAgent, TabularError> {
        let outputs: Vec<Symbol> = self.outputs.iter().map(|s| f(*s)).collect();
        let rows = self
            .rows
            .iter()
            .map(|(k, v)| (k.iter().map(|s| f(*s)).collect(), v.clone()));
        TabularAgent::new(self.depth, outputs, rows)
    }

    /// Swaps the two verdict symbols wherever they appear as outputs.
    pub fn flip_verdicts(&self) -> TabularAgent {
        let swap = |s: Symbol| match s.verdict_bit() {
            Some(b) => Symbol::verdict(!b),
            None => s,
        };
        let mut out = self.clone();
        for s in &mut out.outputs {
            *s = swap(*s);
        }
        out
    }

    /// Replaces each row with `f(context, row)`, revalidating.
    pub fn map_rows(
        &self,
        mut f: impl FnMut(&[Symbol], &[f64]) -> Vec<f64>,
    ) -> Result<TabularAgent, TabularError> {
        let rows = self.rows.iter().map(|(k, v)| (k.clone(), f(k, v)));
        TabularAgent::new(self.depth, self.outputs.clone(), rows)
    }
}

fn validate_row(context: &[Symbol], probs: &[f64], width: usize) -> Result<(), TabularError> {
    if probs.len() != width {
        return Err(TabularError::RowLength {
            context: context.to_vec(),
            got: probs.len(),
            expected: width,
        });
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(TabularError::BadProbability { context: context.to_vec() });
    }
    let sum: f64 = probs.iter().sum();
    if libm::fabs(sum - 1.0) > ROW_TOLERANCE {
        return Err(TabularError::RowSum { context: context.to_vec(), sum });
    }
    Ok(())
}
