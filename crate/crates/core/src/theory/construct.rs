//! Random instance constructors. Every constructor returns an instance whose
//! hypotheses hold by construction; declared parameters are the exact
//! measured values (or the target parameters when building to a target).

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::bounds::{
    BoundError, P1Instance, T2Instance, T3Instance, T4Instance, gttq_advantage,
};
use super::distance::{ContextDist, max_l1};
use super::enumerate::{Policy, exact_advantage};
use crate::tabular::{Symbol, TabularAgent};

/// Every sequence over `alphabet` of length exactly `len`.
pub fn sequences(alphabet: &[Symbol], len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                alphabet.iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(*s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every sequence of length `0..=max_len`.
pub fn sequences_upto(alphabet: &[Symbol], max_len: usize) -> Vec<Vec<Symbol>> {
    (0..=max_len).flat_map(|n| sequences(alphabet, n)).collect()
}

pub fn messages(k: u16) -> Vec<Symbol> {
    (0..k).map(Symbol::message).collect()
}

/// Messages followed by the two verdicts.
pub fn judge_outputs(k: u16) -> Vec<Symbol> {
    let mut v = messages(k);
    v.push(Symbol::VERDICT_DIFFERENT);
    v.push(Symbol::VERDICT_SAME);
    v
}

/// A flat Dirichlet draw; one time in five a point mass instead.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    if rng.random_bool(0.2) {
        let mut row = vec![0.0; n];
        row[rng.random_range(0..n)] = 1.0;
        return row;
    }
    let raw: Vec<f64> = (0..n).map(|_| -libm::log(1.0 - rng.random::<f64>())).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Push the rounding residue into the largest entry so the row sums to 1.
    let residue = 1.0 - row.iter().sum::<f64>();
    let (imax, _) = row
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, v)| if *v > best.1 { (i, *v) } else { best });
    row[imax] += residue;
    row
}

/// Interlocutor over `k` messages with rows for every context up to `depth`.
pub fn random_interlocutor<R: Rng + ?Sized>(rng: &mut R, k: u16, depth: usize) -> TabularAgent {
    let out = messages(k);
    let rows: Vec<_> = sequences_upto(&out, depth)
        .into_iter()
        .map(|c| (c, random_row(rng, out.len())))
        .collect();
    TabularAgent::new(depth, out, rows).expect("generated rows are valid")
}

/// Two-turn distinguisher: opens with a message (with probability
/// `opening_verdict` of answering at once) and answers after one reply.
pub fn random_distinguisher<R: Rng + ?Sized>(rng: &mut R, k: u16, opening_verdict: f64) -> TabularAgent {
    let out = judge_outputs(k);
    let n = usize::from(k);
    let mut rows = Vec::new();
    let mut open = vec![0.0; n + 2];
    let msg = random_row(rng, n);
    let verdict = if opening_verdict > 0.0 { rng.random_range(0.0..opening_verdict) } else { 0.0 };
    for (i, p) in msg.iter().enumerate() {
        open[i] = p * (1.0 - verdict);
    }
    let same = rng.random::<f64>();
    open[n] = verdict * (1.0 - same);
    open[n + 1] = verdict * same;
    rows.push((vec![], open));
    for ctx in sequences(&messages(k), 2) {
        let mut row = vec![0.0; n + 2];
        let v = random_row(rng, 2);
        row[n] = v[0];
        row[n + 1] = v[1];
        rows.push((ctx, row));
    }
    TabularAgent::new(2, out, rows).expect("generated rows are valid")
}

fn arc(t: TabularAgent) -> Arc<TabularAgent> {
    Arc::new(t)
}

pub fn random_p1<R: Rng + ?Sized>(rng: &mut R) -> Result<P1Instance, BoundError> {
    let k = rng.random_range(2..=5);
    let depth = rng.random_range(1..=3);
    let a = random_interlocutor(rng, k, depth);
    let b = random_interlocutor(rng, k, depth);
    let c = random_interlocutor(rng, k, depth);
    let contexts: Vec<Vec<Symbol>> = sequences_upto(&messages(k), depth);
    let weights = random_row(rng, contexts.len());
    let d = ContextDist::new(contexts.into_iter().zip(weights).collect())?;
    let ab = super::distance::l1_distance(&a, &b, &d)?;
    let bc = super::distance::l1_distance(&b, &c, &d)?;
    let eps1 = (ab + rng.random_range(0.0..0.05)).min(2.0);
    let eps2 = (bc + rng.random_range(0.0..0.05)).min(2.0);
    Ok(P1Instance { a: arc(a), b: arc(b), c: arc(c), contexts: d, eps1, eps2 })
}

/// `informed_weight` of `None` draws one at random.
pub fn random_t2<R: Rng + ?Sized>(rng: &mut R, informed_weight: Option<f64>) -> Result<T2Instance, BoundError> {
    let k = rng.random_range(2..=3);
    let rounds = rng.random_range(1..=2);
    let msgs = messages(k);
    // Specimen contexts reach 2·rounds − 1 symbols; the main game needs 1.
    let b_self = random_interlocutor(rng, k, 2 * rounds);
    let b_dist = random_distinguisher(rng, k, 0.0);
    let a_imit = random_interlocutor(rng, k, 1);
    let query = random_interlocutor(rng, k, 2 * rounds);
    let informed_ctx = sequences(&msgs, 2 * rounds + 1);
    let rows: Vec<_> = informed_ctx.into_iter().map(|c| (c, random_row(rng, msgs.len()))).collect();
    let a_informed = TabularAgent::new(2 * rounds + 1, msgs, rows).expect("generated rows are valid");
    let e = informed_weight.unwrap_or_else(|| rng.random::<f64>());
    let mut inst = T2Instance {
        b_self: arc(b_self),
        b_dist: arc(b_dist),
        a_imit: arc(a_imit),
        query: arc(query),
        query_rounds: rounds,
        a_informed: arc(a_informed),
        informed_weight: e,
        eps1: 0.0,
        eps2: e,
        horizon: 2,
    };
    let d = exact_advantage(
        &Policy::Table(inst.a_imit.clone()),
        &Policy::Table(inst.b_self.clone()),
        &Policy::Table(inst.b_dist.clone()),
        2,
    )?;
    inst.eps1 = d.max(0.0);
    let _ = gttq_advantage(&inst)?;
    Ok(inst)
}

fn flip_if_worse(
    dist: TabularAgent,
    actor: &TabularAgent,
    target: &TabularAgent,
) -> Result<TabularAgent, BoundError> {
    let d = exact_advantage(
        &Policy::from(actor.clone()),
        &Policy::from(target.clone()),
        &Policy::from(dist.clone()),
        2,
    )?;
    Ok(if d < 0.0 { dist.flip_verdicts() } else { dist })
}

/// Raw T3 agents before parameters are attached.
struct T3Agents {
    c_self: TabularAgent,
    c_dist: TabularAgent,
    b_self: TabularAgent,
    b_as_c: TabularAgent,
    b_base_dist: TabularAgent,
    b_as_c_dist: TabularAgent,
    a_as_b: TabularAgent,
    a_as_b_as_c: TabularAgent,
    a_deviation: TabularAgent,
}

fn t3_instance(g: T3Agents, w: f64, fw: f64) -> T3Instance {
    T3Instance {
        c_self: arc(g.c_self),
        c_dist: arc(g.c_dist),
        b_self: arc(g.b_self),
        b_as_c: arc(g.b_as_c),
        b_base_dist: arc(g.b_base_dist),
        b_as_c_dist: arc(g.b_as_c_dist),
        a_as_b: arc(g.a_as_b),
        a_as_b_as_c: arc(g.a_as_b_as_c),
        a_deviation: arc(g.a_deviation),
        recursion_weight: w,
        faithful_weight: fw,
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 1.0 - fw,
        zeta: w,
        horizon: 2,
    }
}

fn mix(a: &TabularAgent, b: &TabularAgent, t: f64) -> TabularAgent {
    a.mix(b, t).expect("same alphabet and domain")
}

/// Random T3 instance with parameters set to the measured values.
pub fn random_t3<R: Rng + ?Sized>(rng: &mut R) -> Result<T3Instance, BoundError> {
    let k = rng.random_range(2..=3);
    let c_dist = random_distinguisher(rng, k, 0.0);
    // At most half-way, so the row distance stays within the unit γ range.
    let near = 0.5 * rng.random::<f64>();
    let b_as_c_dist = mix(&c_dist, &random_distinguisher(rng, k, 0.0), near);
    let a_as_b = random_interlocutor(rng, k, 1);
    let b_self = random_interlocutor(rng, k, 1);
    let b_base_dist = flip_if_worse(random_distinguisher(rng, k, 0.0), &a_as_b, &b_self)?;
    let agents = T3Agents {
        c_self: random_interlocutor(rng, k, 1),
        c_dist,
        b_self,
        b_as_c: random_interlocutor(rng, k, 1),
        b_base_dist,
        b_as_c_dist,
        a_as_b,
        a_as_b_as_c: random_interlocutor(rng, k, 1),
        a_deviation: random_interlocutor(rng, k, 1),
    };
    let w = rng.random_range(0.05..=1.0);
    let fw = rng.random::<f64>();
    let mut inst = t3_instance(agents, w, fw);
    measure_t3(&mut inst)?;
    Ok(inst)
}

fn measure_t3(inst: &mut T3Instance) -> Result<(), BoundError> {
    let g = inst.games();
    let d_ab = exact_advantage(&g.a_actor_vs_b, &g.b_target, &g.b_dist, 2)?;
    let d_bc = exact_advantage(
        &Policy::Table(inst.b_as_c.clone()),
        &Policy::Table(inst.c_self.clone()),
        &Policy::Table(inst.c_dist.clone()),
        2,
    )?;
    inst.alpha = d_ab.clamp(0.0, 1.0);
    inst.beta = d_bc.clamp(0.0, 1.0);
    inst.gamma = max_l1(&inst.b_as_c_dist, &inst.c_dist)?.min(1.0);
    Ok(())
}

/// T3 instance meeting α = ε²/4, β = γ = δ = ε/4, ζ = ε.
///
/// At horizon 2 every interlocutor speaks once, so advantages are affine in a
/// row-wise mixing weight; agents are pulled toward their references until the
/// targets are met.
pub fn t3_for_epsilon<R: Rng + ?Sized>(rng: &mut R, eps: f64) -> Result<T3Instance, BoundError> {
    let (alpha, quarter) = (eps * eps / 4.0, eps / 4.0);
    let k = rng.random_range(2..=3);
    let c_self = random_interlocutor(rng, k, 1);
    let c_dist = random_distinguisher(rng, k, 0.0);
    let b_self = random_interlocutor(rng, k, 1);

    let far = random_distinguisher(rng, k, 0.0);
    let spread = max_l1(&far, &c_dist)?;
    let t = if spread > quarter { quarter / spread } else { 1.0 };
    let b_as_c_dist = mix(&c_dist, &far, t);

    let raw_b_as_c = random_interlocutor(rng, k, 1);
    let d1 = exact_advantage(&Policy::from(raw_b_as_c.clone()), &Policy::from(c_self.clone()), &Policy::from(c_dist.clone()), 2)?;
    let t = if d1 > quarter { quarter / d1 } else { 1.0 };
    let b_as_c = mix(&c_self, &raw_b_as_c, t);

    let raw_a_as_b = random_interlocutor(rng, k, 1);
    let raw_a_as_b_as_c = random_interlocutor(rng, k, 1);
    let b_base_dist = flip_if_worse(random_distinguisher(rng, k, 0.0), &raw_a_as_b, &b_self)?;
    let w = rng.random_range(eps..=1.0);
    let fw = rng.random_range(1.0 - quarter..=1.0);

    let probe = t3_instance(
        T3Agents {
            c_self: c_self.clone(),
            c_dist: c_dist.clone(),
            b_self: b_self.clone(),
            b_as_c: b_as_c.clone(),
            b_base_dist: b_base_dist.clone(),
            b_as_c_dist: b_as_c_dist.clone(),
            a_as_b: raw_a_as_b.clone(),
            a_as_b_as_c: raw_a_as_b_as_c.clone(),
            a_deviation: c_self.clone(),
        },
        w,
        fw,
    );
    let g = probe.games();
    let d1 = exact_advantage(&g.a_actor_vs_b, &g.b_target, &g.b_dist, 2)?;
    let t = if d1 > alpha { alpha / d1 } else { 1.0 };
    let a_as_b = mix(&b_self, &raw_a_as_b, t);
    let a_as_b_as_c = mix(&b_as_c, &raw_a_as_b_as_c, t);

    let mut inst = t3_instance(
        T3Agents {
            c_self,
            c_dist,
            b_self,
            b_as_c,
            b_base_dist,
            b_as_c_dist,
            a_as_b,
            a_as_b_as_c,
            a_deviation: random_interlocutor(rng, k, 1),
        },
        w,
        fw,
    );
    inst.alpha = alpha;
    inst.beta = quarter;
    inst.gamma = quarter;
    inst.delta = quarter;
    inst.zeta = eps;
    Ok(inst)
}

/// Random T4 instance. `zeta` of `None` draws ζ in [0.05, 1]; the reuse
/// probability is drawn in [ζ, 1]. α and β are the measured advantages
/// (clamped to [0, 1]).
pub fn random_t4<R: Rng + ?Sized>(rng: &mut R, zeta: Option<f64>) -> Result<T4Instance, BoundError> {
    let k = rng.random_range(2..=3);
    let zeta = zeta.unwrap_or_else(|| rng.random_range(0.05..=1.0));
    let mut inst = T4Instance {
        a_act: arc(random_interlocutor(rng, k, 1)),
        b_self: arc(random_interlocutor(rng, k, 1)),
        c_self: arc(random_interlocutor(rng, k, 1)),
        d_wrt_c: arc(random_distinguisher(rng, k, 0.0)),
        d_other: arc(random_distinguisher(rng, k, 0.0)),
        reuse_weight: rng.random_range(zeta..=1.0),
        alpha: 0.0,
        beta: 0.0,
        zeta,
        horizon: 2,
    };
    let d_wrt_b = Policy::mixture([
        (inst.reuse_weight, Policy::Table(inst.d_wrt_c.clone())),
        (1.0 - inst.reuse_weight, Policy::Table(inst.d_other.clone())),
    ]);
    let a = Policy::Table(inst.a_act.clone());
    let b = Policy::Table(inst.b_self.clone());
    let c = Policy::Table(inst.c_self.clone());
    inst.alpha = exact_advantage(&a, &b, &d_wrt_b, 2)?.clamp(0.0, 1.0);
    inst.beta = exact_advantage(&b, &c, &Policy::Table(inst.d_wrt_c.clone()), 2)?.clamp(0.0, 1.0);
    Ok(inst)
}

/// Fixed-distinguisher instance with ζ = 1, α = 0: A behaves exactly as B and
/// D always judges with its C protocol, so d_D(A,C) = d_D(B,C).
pub fn t4_identical_actor<R: Rng + ?Sized>(rng: &mut R) -> Result<T4Instance, BoundError> {
    loop {
        let k = 2;
        let b = random_interlocutor(rng, k, 1);
        let inst = T4Instance {
            a_act: arc(b.clone()),
            b_self: arc(b),
            c_self: arc(random_interlocutor(rng, k, 1)),
            d_wrt_c: arc(random_distinguisher(rng, k, 0.0)),
            d_other: arc(random_distinguisher(rng, k, 0.0)),
            reuse_weight: 1.0,
            alpha: 0.0,
            beta: 0.0,
            zeta: 1.0,
            horizon: 2,
        };
        let d_bc = exact_advantage(
            &Policy::Table(inst.b_self.clone()),
            &Policy::Table(inst.c_self.clone()),
            &Policy::Table(inst.d_wrt_c.clone()),
            2,
        )?;
        if d_bc > 0.01 {
            return Ok(T4Instance { beta: d_bc, ..inst });
        }
    }
}

/// Password attack: B instances share a secret drawn uniformly from two
/// passwords; B's distinguisher asks for it and accepts only the right one. A
/// cannot know it without a specimen; with one query it learns and repeats it.
/// Returns the exact advantages `(d, d_q)` averaged over the secret.
pub fn password_attack() -> Result<(f64, f64), BoundError> {
    let ask = Symbol::message(0);
    let pw = [Symbol::message(1), Symbol::message(2)];
    let msgs = messages(3);
    let mut d = 0.0;
    let mut dq = 0.0;
    for secret in &pw {
        let point = |s: Symbol| -> Vec<f64> { msgs.iter().map(|m| if *m == s { 1.0 } else { 0.0 }).collect() };
        let b_self = TabularAgent::new(
            2,
            msgs.clone(),
            sequences_upto(&msgs, 2).into_iter().map(|c| (c, point(*secret))),
        )
        .expect("valid");
        let outs = judge_outputs(3);
        let mut rows = vec![(vec![], {
            let mut r = vec![0.0; 5];
            r[0] = 1.0;
            r
        })];
        for ctx in sequences(&msgs, 2) {
            let mut r = vec![0.0; 5];
            if ctx[1] == *secret { r[4] = 1.0 } else { r[3] = 1.0 }
            rows.push((ctx, r));
        }
        let b_dist = TabularAgent::new(2, outs, rows).expect("valid");
        let guess: Vec<f64> = vec![0.0, 0.5, 0.5];
        let a_imit = TabularAgent::new(1, msgs.clone(), msgs.iter().map(|m| (vec![*m], guess.clone())))
            .expect("valid");
        let query = TabularAgent::constant(2, msgs.clone(), &sequences_upto(&msgs, 2), &point(ask))
            .expect("valid");
        // Informed actor sees [ask, reply, opening] and repeats the reply.
        let a_informed = TabularAgent::new(
            3,
            msgs.clone(),
            sequences(&msgs, 3).into_iter().map(|c| {
                let r = point(c[1]);
                (c, r)
            }),
        )
        .expect("valid");
        let inst = T2Instance {
            b_self: arc(b_self),
            b_dist: arc(b_dist),
            a_imit: arc(a_imit),
            query: arc(query),
            query_rounds: 1,
            a_informed: arc(a_informed),
            informed_weight: 1.0,
            eps1: 1.0,
            eps2: 1.0,
            horizon: 2,
        };
        d += 0.5
            * exact_advantage(
                &Policy::Table(inst.a_imit.clone()),
                &Policy::Table(inst.b_self.clone()),
                &Policy::Table(inst.b_dist.clone()),
                2,
            )?;
        dq += 0.5 * gttq_advantage(&inst)?;
    }
    Ok((d, dq))
}
