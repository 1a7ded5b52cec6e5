//! Thresholded comparator relation over a model universe.
#![allow(clippy::needless_range_loop)]

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Square advantage matrix: rows are actors, columns targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageMatrix {
    pub models: Vec<String>,
    /// `d[i][j]` is `d̂(models[i], models[j])`; `None` for untested cells.
    pub d: Vec<Vec<Option<f64>>>,
}

impl AdvantageMatrix {
    pub fn new(models: Vec<String>, d: Vec<Vec<Option<f64>>>) -> Self {
        assert!(d.len() == models.len() && d.iter().all(|r| r.len() == models.len()), "matrix must be square");
        AdvantageMatrix { models, d }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    pub epsilon: f64,
    pub nodes: Vec<String>,
    /// `(i, j)` with `d̂(i, j) ≤ ε`, `i ≠ j`, row-major order.
    pub edges: Vec<(usize, usize)>,
    pub strict_edges: Vec<(usize, usize)>,
    /// Components of the mutual-edge graph, each sorted, ordered by first member.
    pub classes: Vec<Vec<usize>>,
    pub violations: u64,
}

impl RelationGraph {
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut adj = vec![vec![false; n]; n];
        for &(i, j) in &self.edges {
            adj[i][j] = true;
        }
        adj
    }
}

fn edge_matrix(m: &AdvantageMatrix, epsilon: f64) -> Vec<Vec<bool>> {
    let n = m.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = i != j && m.d[i][j].is_some_and(|d| d <= epsilon);
        }
    }
    adj
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the graph keeping only mutual edges.
pub fn equivalence_classes(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if adj[i][j] && adj[j][i] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[r]].push(i);
    }
    classes
}

/// Ordered triples of distinct nodes with `a→b`, `b→c` and no `a→c`.
pub fn transitivity_violations(adj: &[Vec<bool>]) -> u64 {
    let n = adj.len();
    let mut count = 0;
    for b in 0..n {
        for a in (0..n).filter(|&a| a != b && adj[a][b]) {
            for c in (0..n).filter(|&c| c != a && c != b && adj[b][c]) {
                if !adj[a][c] {
                    count += 1;
                }
            }
        }
    }
    count
}

pub fn relation_at_epsilon(m: &AdvantageMatrix, epsilon: f64) -> RelationGraph {
    let adj = edge_matrix(m, epsilon);
    let n = m.len();
    let mut edges = Vec::new();
    let mut strict_edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if adj[i][j] {
                edges.push((i, j));
                if !adj[j][i] {
                    strict_edges.push((i, j));
                }
            }
        }
    }
    RelationGraph {
        epsilon,
        nodes: m.models.clone(),
        edges,
        strict_edges,
        classes: equivalence_classes(&adj),
        violations: transitivity_violations(&adj),
    }
}

/// Edge count at each threshold of `grid`.
pub fn edge_curve(m: &AdvantageMatrix, grid: &[f64]) -> Vec<(f64, usize)> {
    grid.iter()
        .map(|&e| (e, edge_matrix(m, e).iter().flatten().filter(|x| **x).count()))
        .collect()
}
