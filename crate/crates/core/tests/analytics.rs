use gtt_core::analytics::{
    AdvantageMatrix, BranchCounts, CellCounts, SelfPool, binomial_se, edge_curve, estimate_pair,
    relation_at_epsilon, round3, transitivity_violations, turing_scores,
};
use gtt_core::theory::construct::random_interlocutor;
use gtt_core::theory::{ContextDist, l1_distance};
use gtt_core::{Symbol, TabularAgent};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn published_gtt_rows_satisfy_identity() {
    for r in rows(include_str!("fixtures/turing_scores_gtt.csv")) {
        for base in [1, 4] {
            let (t, f, d) = (num(&r[base]), num(&r[base + 1]), num(&r[base + 2]));
            assert!((t - (0.5 * f + 0.5 * d)).abs() <= 0.001 + 1e-12, "{r:?}");
        }
    }
}

#[test]
fn published_fd_rows_satisfy_identity() {
    let all = rows(include_str!("fixtures/turing_scores_fd.csv"));
    assert_eq!(all.len(), 16);
    for r in all {
        let (f, rr, t) = (num(&r[2]), num(&r[3]), num(&r[4]));
        assert!((t - (0.5 * f + 0.5 * rr)).abs() <= 0.001 + 1e-12, "{r:?}");
    }
}

#[test]
fn standard_errors() {
    assert!((binomial_se(0.5, 10, false) - 0.158).abs() < 5e-4);
    assert!((binomial_se(0.5, 10, true) - 0.1118).abs() < 5e-4);
    assert!((binomial_se(0.5, 10, true) - 1.0 / 80f64.sqrt()).abs() < 1e-15);
    let c = BranchCounts { imit_correct: 5, imit_fooled: 5, self_correct: 5, self_wrong: 5, ..Default::default() };
    let e = estimate_pair(&c).unwrap();
    assert!((e.se_worst - binomial_se(0.0, 10, true)).abs() < 1e-15);
    assert!((e.se - e.se_worst).abs() < 1e-15);
}

#[test]
fn scores_from_counts_obey_identity_and_pooling() {
    let models: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let mut cells = CellCounts::new();
    let mut k = 0u64;
    for a in &models {
        for b in &models {
            k += 1;
            cells.insert(
                (a.clone(), b.clone()),
                BranchCounts { imit_correct: k % 4, imit_fooled: 1 + k % 3, self_correct: 2 + k % 2, self_wrong: 1, ..Default::default() },
            );
        }
    }
    for pool in [SelfPool::SelfPairCell, SelfPool::AllTargetBranches] {
        let t = turing_scores(&models, &cells, pool).unwrap();
        assert_eq!(t.self_pool, pool);
        for r in &t.rows {
            assert!((r.t - 0.5 * r.f - 0.5 * r.d).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&r.f) && (0.0..=1.0).contains(&r.d));
        }
    }
    assert_eq!(round3(0.7215), 0.722);
}

fn brute_edges(d: &[Vec<Option<f64>>], eps: f64) -> Vec<Vec<bool>> {
    let n = d.len();
    let mut e = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if let Some(v) = d[i][j] {
                    e[i][j] = v <= eps;
                }
            }
        }
    }
    e
}

fn brute_classes(e: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = e.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if e[i][j] && e[j][i] {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if !seen[i] {
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j]).collect();
            for &j in &class {
                seen[j] = true;
            }
            out.push(class);
        }
    }
    out
}

fn brute_violations(e: &[Vec<bool>]) -> u64 {
    let n = e.len();
    let mut c = 0;
    for a in 0..n {
        for b in 0..n {
            for x in 0..n {
                if a != b && b != x && a != x && e[a][b] && e[b][x] && !e[a][x] {
                    c += 1;
                }
            }
        }
    }
    c
}

fn matrix() -> impl Strategy<Value = Vec<Vec<Option<f64>>>> {
    (2usize..=9).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, -0.5f64..0.5), n), n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relation_matches_brute_force(d in matrix(), eps in -0.2f64..0.3) {
        let n = d.len();
        let m = AdvantageMatrix::new((0..n).map(|i| format!("m{i}")).collect(), d.clone());
        let g = relation_at_epsilon(&m, eps);
        let e = brute_edges(&d, eps);
        prop_assert_eq!(g.adjacency(), e.clone());
        for &(i, j) in &g.strict_edges {
            prop_assert!(e[i][j] && !e[j][i]);
        }
        let strict = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| e[i][j] && !e[j][i]).count();
        prop_assert_eq!(g.strict_edges.len(), strict);
        prop_assert_eq!(g.classes.clone(), brute_classes(&e));
        prop_assert_eq!(g.violations, brute_violations(&e));
        prop_assert_eq!(transitivity_violations(&e), g.violations);
        let mut grid = vec![eps - 0.1, eps, eps + 0.05, eps + 0.2];
        grid.sort_by(f64::total_cmp);
        let curve = edge_curve(&m, &grid);
        prop_assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        let lo = relation_at_epsilon(&m, grid[0]);
        let hi = relation_at_epsilon(&m, grid[3]);
        prop_assert!(lo.edges.iter().all(|x| hi.edges.contains(x)));
    }

    #[test]
    fn l1_is_symmetric_and_relabel_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_interlocutor(&mut rng, 3, 1);
        let q = random_interlocutor(&mut rng, 3, 1);
        let ctx = ContextDist::uniform(p.contexts().map(<[Symbol]>::to_vec).collect()).unwrap();
        let pq = l1_distance(&p, &q, &ctx).unwrap();
        prop_assert!((pq - l1_distance(&q, &p, &ctx).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&pq));
        let (s0, s1) = (Symbol::message(0), Symbol::message(1));
        let swap = |s: Symbol| if s == s0 { s1 } else if s == s1 { s0 } else { s };
        let (rp, rq) = (p.relabel(swap).unwrap(), q.relabel(swap).unwrap());
        let rctx = ContextDist::uniform(rp.contexts().map(<[Symbol]>::to_vec).collect()).unwrap();
        prop_assert!((pq - l1_distance(&rp, &rq, &rctx).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn rows_revalidate_after_json() {
    let t = TabularAgent::new(0, vec![Symbol::message(0), Symbol::message(1)], [(vec![], vec![0.25, 0.75])]).unwrap();
    let back: TabularAgent = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
}
