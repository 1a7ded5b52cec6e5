//! CSV / JSON / DOT outputs of a run.

use std::path::{Path, PathBuf};

use gtt_core::analytics::{
    AdvantageMatrix, CellCounts, FdScore, ProbeMessage, ProbeReport, ProbeRules, RelationGraph, ScoreError,
    ScoreTable, SelfPool, estimate_pair, fd_turing_scores, relation_at_epsilon, turing_scores,
};
use gtt_core::protocol::{Channel, Sender, TrialRecord};
use serde::Serialize;
use serde_json::json;

use crate::aggregate::Aggregate;
use crate::runner::store::{RunDir, StoreError, write_atomic, write_json};

pub type Matrix = Vec<Vec<Option<f64>>>;

/// `d̂` and its plug-in standard error per (actor row, target column).
pub fn advantage(models: &[String], cells: &CellCounts) -> (AdvantageMatrix, Matrix) {
    let n = models.len();
    let mut d = vec![vec![None; n]; n];
    let mut se = vec![vec![None; n]; n];
    for (i, a) in models.iter().enumerate() {
        for (j, b) in models.iter().enumerate() {
            if let Some(e) = cells.get(&(a.clone(), b.clone())).and_then(|c| estimate_pair(c).ok()) {
                d[i][j] = Some(e.d_hat);
                se[i][j] = Some(e.se);
            }
        }
    }
    (AdvantageMatrix::new(models.to_vec(), d), se)
}

/// Square matrix as CSV; empty cells for missing values.
pub fn matrix_csv(models: &[String], m: &Matrix) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["actor\\target".to_string()];
    header.extend(models.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in models.iter().zip(m) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))
}

pub fn scores_csv(t: &ScoreTable) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "f", "d", "t"])?;
    for r in &t.rows {
        w.write_record([r.model.clone(), r.f.to_string(), r.d.to_string(), r.t.to_string()])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))
}

pub fn fd_scores_csv(rows: &[FdScore]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["distinguisher", "actor", "f", "r", "t"])?;
    for r in rows {
        w.write_record([r.judge.clone(), r.actor.clone(), r.f.to_string(), r.r.to_string(), r.t.to_string()])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))
}

#[derive(Debug, Default)]
pub struct ScoresOutput {
    pub files: Vec<PathBuf>,
    pub table: Option<ScoreTable>,
    pub fd: Vec<FdScore>,
    pub errors: Vec<String>,
}

/// Writes `d_hat.csv`, `se.csv`, and score tables (`scores.csv` /
/// `scores.json` for self-judged cells, `fd_scores.csv` for fixed judges).
pub fn write_scores(dir: &Path, agg: &Aggregate, pool: SelfPool) -> Result<ScoresOutput, StoreError> {
    let mut out = ScoresOutput::default();
    let cells = agg.gtt_cells();
    if !cells.is_empty() {
        let (m, se) = advantage(&agg.models, &cells);
        for (name, data) in [("d_hat.csv", &m.d), ("se.csv", &se)] {
            let p = dir.join(name);
            write_atomic(&p, &matrix_csv(&agg.models, data)?)?;
            out.files.push(p);
        }
        match turing_scores(&agg.models, &cells, pool) {
            Ok(t) => {
                let p = dir.join("scores.csv");
                write_atomic(&p, &scores_csv(&t)?)?;
                out.files.push(p);
                let p = dir.join("scores.json");
                write_json(&p, &t)?;
                out.files.push(p);
                out.table = Some(t);
            }
            Err(e) => out.errors.push(format!("turing scores: {e}")),
        }
    }
    let q = agg.accept_table();
    for judge in agg.judges() {
        match fd_turing_scores(&judge, &agg.models, &q) {
            Ok(rows) => out.fd.extend(rows),
            Err(ScoreError::UniverseTooSmall { .. }) => {}
            Err(e) => out.errors.push(format!("fixed judge {judge}: {e}")),
        }
    }
    if !out.fd.is_empty() {
        let p = dir.join("fd_scores.csv");
        write_atomic(&p, &fd_scores_csv(&out.fd)?)?;
        out.files.push(p);
    }
    Ok(out)
}

pub fn graph_json(g: &RelationGraph) -> serde_json::Value {
    let name = |i: usize| g.nodes[i].clone();
    let pairs = |e: &[(usize, usize)]| e.iter().map(|&(i, j)| [name(i), name(j)]).collect::<Vec<_>>();
    json!({
        "epsilon": g.epsilon,
        "nodes": g.nodes,
        "edges": pairs(&g.edges),
        "strict_edges": pairs(&g.strict_edges),
        "classes": g.classes.iter().map(|c| c.iter().map(|&i| name(i)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "transitivity_violations": g.violations,
    })
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// An arrow `a -> b` means `a` imitates `b` within ε. Mutual pairs are drawn
/// once with arrowheads on both ends.
pub fn graph_dot(g: &RelationGraph) -> String {
    let adj = g.adjacency();
    let mut s = String::from("digraph comparator {\n");
    s.push_str(&format!("  label={};\n", dot_id(&format!("epsilon = {}", g.epsilon))));
    for (c, members) in g.classes.iter().enumerate() {
        if members.len() > 1 {
            s.push_str(&format!("  subgraph cluster_{c} {{ style=dashed;"));
            for &i in members {
                s.push_str(&format!(" {};", dot_id(&g.nodes[i])));
            }
            s.push_str(" }\n");
        }
    }
    for n in &g.nodes {
        s.push_str(&format!("  {};\n", dot_id(n)));
    }
    for &(i, j) in &g.edges {
        let (a, b) = (dot_id(&g.nodes[i]), dot_id(&g.nodes[j]));
        if adj[j][i] {
            if i < j {
                s.push_str(&format!("  {a} -> {b} [dir=both];\n"));
            }
        } else {
            s.push_str(&format!("  {a} -> {b};\n"));
        }
    }
    s.push_str("}\n");
    s
}

/// Writes `graph_eps{ε}.dot` and `.json`.
pub fn write_graph(dir: &Path, agg: &Aggregate, epsilon: f64) -> Result<(RelationGraph, Vec<PathBuf>), StoreError> {
    let (m, _) = advantage(&agg.models, &agg.gtt_cells());
    let g = relation_at_epsilon(&m, epsilon);
    let stem = format!("graph_eps{epsilon}");
    let dot = dir.join(format!("{stem}.dot"));
    write_atomic(&dot, graph_dot(&g).as_bytes())?;
    let js = dir.join(format!("{stem}.json"));
    write_json(&js, &graph_json(&g))?;
    Ok((g, vec![dot, js]))
}

/// Distinguisher messages of the main channel.
pub fn probe_corpus<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Vec<ProbeMessage> {
    records
        .into_iter()
        .flat_map(|r| {
            r.messages(Channel::Main)
                .filter(|m| matches!(m.sender, Sender::Distinguisher | Sender::Human))
                .map(|m| ProbeMessage { text: m.content.clone(), first_turn: m.index == 0 })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ProbeOutput {
    pub overall: ProbeReport,
    /// Per distinguisher model.
    pub by_distinguisher: std::collections::BTreeMap<String, ProbeReport>,
}

pub fn write_probes(dir: &Path, rules: &ProbeRules) -> Result<(ProbeOutput, PathBuf), StoreError> {
    let (records, _) = RunDir::open(dir).load_trials()?;
    let corpus = probe_corpus(records.values());
    let mut by = std::collections::BTreeMap::new();
    let mut judges: std::collections::BTreeMap<String, Vec<&TrialRecord>> = Default::default();
    for r in records.values() {
        judges.entry(r.config.variant.distinguisher_model().to_string()).or_default().push(r);
    }
    for (j, rs) in judges {
        by.insert(j, rules.report(&probe_corpus(rs)));
    }
    let out = ProbeOutput { overall: rules.report(&corpus), by_distinguisher: by };
    let p = dir.join("probe_report.json");
    write_json(&p, &out)?;
    Ok((out, p))
}
