//! Exact game probabilities by enumerating every interaction path.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::tabular::{Symbol, TabularAgent, TabularError};

/// A possibly randomized, possibly role-switching agent over symbols.
///
/// Mixtures model a latent choice made once, before the interaction starts.
#[derive(Debug, Clone)]
pub enum Policy {
    Table(Arc<TabularAgent>),
    Mixture(Vec<(f64, Policy)>),
    /// Opens the game with a marked symbol and then plays `0` on the unmarked
    /// transcript: a distinguisher that starts an imitation game of its own.
    Recursive(Box<Policy>),
    /// Plays `marked` when the transcript opens with a marked symbol, `plain`
    /// otherwise; both see the unmarked transcript.
    OnMarker { marked: Box<Policy>, plain: Box<Policy> },
    /// Sees `prefix` before the visible transcript (e.g. a specimen exchange).
    Prefixed { prefix: Vec<Symbol>, inner: Box<Policy> },
}

impl From<TabularAgent> for Policy {
    fn from(t: TabularAgent) -> Self {
        Policy::Table(Arc::new(t))
    }
}

impl From<Arc<TabularAgent>> for Policy {
    fn from(t: Arc<TabularAgent>) -> Self {
        Policy::Table(t)
    }
}

impl Policy {
    pub fn mixture(parts: impl IntoIterator<Item = (f64, Policy)>) -> Self {
        Policy::Mixture(parts.into_iter().collect())
    }

    pub fn recursive(inner: impl Into<Policy>) -> Self {
        Policy::Recursive(Box::new(inner.into()))
    }

    pub fn on_marker(marked: impl Into<Policy>, plain: impl Into<Policy>) -> Self {
        Policy::OnMarker { marked: Box::new(marked.into()), plain: Box::new(plain.into()) }
    }

    pub fn prefixed(prefix: Vec<Symbol>, inner: impl Into<Policy>) -> Self {
        Policy::Prefixed { prefix, inner: Box::new(inner.into()) }
    }

    /// Expands latent mixtures into weighted mixture-free components.
    pub fn components(&self) -> Vec<(f64, Pure)> {
        match self {
            Policy::Table(t) => vec![(1.0, Pure::Table(t.clone()))],
            Policy::Mixture(parts) => parts
                .iter()
                .flat_map(|(w, p)| p.components().into_iter().map(move |(v, c)| (w * v, c)))
                .collect(),
            Policy::Recursive(inner) => inner
                .components()
                .into_iter()
                .map(|(w, c)| (w, Pure::Recursive(Box::new(c))))
                .collect(),
            Policy::OnMarker { marked, plain } => {
                let plain = plain.components();
                let mut out = Vec::new();
                for (wm, m) in marked.components() {
                    for (wp, p) in &plain {
                        out.push((
                            wm * wp,
                            Pure::OnMarker { marked: Box::new(m.clone()), plain: Box::new(p.clone()) },
                        ));
                    }
                }
                out
            }
            Policy::Prefixed { prefix, inner } => inner
                .components()
                .into_iter()
                .map(|(w, c)| (w, Pure::Prefixed { prefix: prefix.clone(), inner: Box::new(c) }))
                .collect(),
        }
    }
}

/// Mixture-free policy.
#[derive(Debug, Clone)]
pub enum Pure {
    Table(Arc<TabularAgent>),
    Recursive(Box<Pure>),
    OnMarker { marked: Box<Pure>, plain: Box<Pure> },
    Prefixed { prefix: Vec<Symbol>, inner: Box<Pure> },
}

fn unmarked(ctx: &[Symbol]) -> Vec<Symbol> {
    ctx.iter().map(|s| s.unmarked()).collect()
}

impl Pure {
    /// Next-symbol distribution (non-zero entries) given the joint transcript.
    pub fn next(&self, ctx: &[Symbol]) -> Result<Vec<(Symbol, f64)>, TabularError> {
        match self {
            Pure::Table(t) => Ok(t.distribution(ctx)?.collect()),
            Pure::Recursive(inner) => {
                let dist = inner.next(&unmarked(ctx))?;
                if ctx.is_empty() {
                    Ok(dist.into_iter().map(|(s, p)| (s.marked(), p)).collect())
                } else {
                    Ok(dist)
                }
            }
            Pure::OnMarker { marked, plain } => {
                let branch = if ctx.first().is_some_and(|s| s.is_marked()) { marked } else { plain };
                branch.next(&unmarked(ctx))
            }
            Pure::Prefixed { prefix, inner } => {
                let mut full = prefix.clone();
                full.extend_from_slice(ctx);
                inner.next(&full)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnumError {
    #[error("distinguisher can continue past the horizon of {horizon} turns after {context:?}")]
    Horizon { horizon: usize, context: Vec<Symbol> },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Table(#[from] TabularError),
}

/// Probabilities that `distinguisher`, facing `interlocutor`, outputs verdict 0
/// and verdict 1. The distinguisher speaks first and must emit a verdict by its
/// `horizon`-th message on every path with positive probability.
pub fn verdict_probs(
    distinguisher: &Policy,
    interlocutor: &Policy,
    horizon: usize,
) -> Result<[f64; 2], EnumError> {
    if horizon == 0 {
        return Err(EnumError::ZeroHorizon);
    }
    let inter = interlocutor.components();
    let mut out = [0.0; 2];
    for (wd, d) in distinguisher.components() {
        for (wi, i) in &inter {
            if wd * wi == 0.0 {
                continue;
            }
            let mut acc = [0.0; 2];
            let mut ctx = Vec::with_capacity(2 * horizon);
            walk(&d, i, horizon, 1, 1.0, &mut ctx, &mut acc)?;
            out[0] += wd * wi * acc[0];
            out[1] += wd * wi * acc[1];
        }
    }
    Ok(out)
}

fn walk(
    d: &Pure,
    x: &Pure,
    horizon: usize,
    turn: usize,
    mass: f64,
    ctx: &mut Vec<Symbol>,
    acc: &mut [f64; 2],
) -> Result<(), EnumError> {
    for (m, pm) in d.next(ctx)? {
        let mass = mass * pm;
        if let Some(bit) = m.verdict_bit() {
            acc[usize::from(bit)] += mass;
            continue;
        }
        if turn == horizon {
            return Err(EnumError::Horizon { horizon, context: ctx.clone() });
        }
        ctx.push(m);
        for (r, pr) in x.next(ctx)? {
            ctx.push(r);
            walk(d, x, horizon, turn + 1, mass * pr, ctx, acc)?;
            ctx.pop();
        }
        ctx.pop();
    }
    Ok(())
}

/// Exact distinguisher success probability p(actor, target):
/// ½·Pr[verdict 1 | target] + ½·Pr[verdict 0 | actor].
pub fn exact_gtt_success(
    actor: &Policy,
    target: &Policy,
    distinguisher: &Policy,
    horizon: usize,
) -> Result<f64, EnumError> {
    let on_target = verdict_probs(distinguisher, target, horizon)?;
    let on_actor = verdict_probs(distinguisher, actor, horizon)?;
    Ok(0.5 * on_target[1] + 0.5 * on_actor[0])
}

/// Advantage d = p − ½.
pub fn exact_advantage(
    actor: &Policy,
    target: &Policy,
    distinguisher: &Policy,
    horizon: usize,
) -> Result<f64, EnumError> {
    Ok(exact_gtt_success(actor, target, distinguisher, horizon)? - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(i: u16) -> Symbol {
        Symbol::message(i)
    }

    fn dist_table() -> TabularAgent {
        // Opens with s0, then says "same" iff the reply was s0.
        let outs = vec![s(0), s(1), Symbol::VERDICT_DIFFERENT, Symbol::VERDICT_SAME];
        TabularAgent::new(
            2,
            outs,
            [
                (vec![], vec![1.0, 0.0, 0.0, 0.0]),
                (vec![s(0), s(0)], vec![0.0, 0.0, 0.0, 1.0]),
                (vec![s(0), s(1)], vec![0.0, 0.0, 1.0, 0.0]),
            ],
        )
        .unwrap()
    }

    fn replier(x: u16) -> TabularAgent {
        let row = if x == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
        TabularAgent::new(1, vec![s(0), s(1)], [(vec![s(0)], row)]).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let p = exact_gtt_success(&replier(1).into(), &replier(0).into(), &dist_table().into(), 2)
            .unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn identical_agents_give_half() {
        let p = exact_gtt_success(&replier(0).into(), &replier(0).into(), &dist_table().into(), 2)
            .unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn horizon_error() {
        let err = verdict_probs(&dist_table().into(), &replier(0).into(), 1).unwrap_err();
        assert!(matches!(err, EnumError::Horizon { horizon: 1, .. }));
    }

    #[test]
    fn mixture_is_linear() {
        let mix = Policy::mixture([(0.25, replier(0).into()), (0.75, replier(1).into())]);
        let v = verdict_probs(&dist_table().into(), &mix, 2).unwrap();
        assert!((v[1] - 0.25).abs() < 1e-15 && (v[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn recursion_marks_opening_and_switches_interlocutor() {
        let rec = Policy::recursive(dist_table());
        let x = Policy::on_marker(replier(0), replier(1));
        assert_eq!(verdict_probs(&rec, &x, 2).unwrap(), [0.0, 1.0]);
        assert_eq!(verdict_probs(&dist_table().into(), &x, 2).unwrap(), [1.0, 0.0]);
    }
}
