//! Per-cell branch counts from a run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gtt_core::analytics::{AcceptTable, BranchCounts, CellCounts};
use gtt_core::protocol::TrialRecord;
use serde::Serialize;

use crate::runner::store::{RunDir, StoreError, write_atomic};

/// Cell coordinates: who judged, who acted, who was imitated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub judge: String,
    pub actor: String,
    pub target: String,
    /// Judge is a third party (fixed-distinguisher games).
    pub fixed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Aggregate {
    /// Plan order when a manifest exists, else sorted.
    pub models: Vec<String>,
    pub cells: BTreeMap<CellKey, BranchCounts>,
    pub corrupt: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
    /// Trials requested per cell, when known from the manifest.
    pub expected_per_cell: Option<u64>,
}

impl Aggregate {
    /// Self-judged cells keyed `(actor, target)`.
    pub fn gtt_cells(&self) -> CellCounts {
        self.cells
            .iter()
            .filter(|(k, _)| !k.fixed)
            .map(|(k, c)| ((k.actor.clone(), k.target.clone()), *c))
            .collect()
    }

    pub fn judges(&self) -> BTreeSet<String> {
        self.cells.keys().filter(|k| k.fixed).map(|k| k.judge.clone()).collect()
    }

    /// Acceptance rate of each fixed judge facing an imitator named as the
    /// target: the share of imitator-branch verdicts saying "it is the target".
    pub fn accept_table(&self) -> AcceptTable {
        self.cells
            .iter()
            .filter(|(k, c)| k.fixed && c.n_imit() > 0)
            .map(|(k, c)| {
                ((k.judge.clone(), k.actor.clone(), k.target.clone()), c.imit_fooled as f64 / c.n_imit() as f64)
            })
            .collect()
    }

    pub fn is_clean(&self) -> bool {
        self.corrupt.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "judge",
            "actor",
            "target",
            "imit_correct",
            "imit_fooled",
            "self_correct",
            "self_wrong",
            "unparseable",
            "opening",
            "analyzable",
        ])?;
        for (k, c) in &self.cells {
            w.write_record([
                k.judge.clone(),
                k.actor.clone(),
                k.target.clone(),
                c.imit_correct.to_string(),
                c.imit_fooled.to_string(),
                c.self_correct.to_string(),
                c.self_wrong.to_string(),
                c.unparseable.to_string(),
                c.opening.to_string(),
                c.analyzable().to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))
    }
}

pub fn key_of(r: &TrialRecord) -> CellKey {
    let v = &r.config.variant;
    CellKey {
        judge: v.distinguisher_model().to_string(),
        actor: v.actor.clone(),
        target: v.target.clone(),
        fixed: v.fixed_distinguisher.is_some(),
    }
}

/// Counts records into cells. Records without a verdict or with a backend
/// failure are tallied as unparseable and excluded from the branches.
pub fn count_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> BTreeMap<CellKey, BranchCounts> {
    let mut cells: BTreeMap<CellKey, BranchCounts> = BTreeMap::new();
    for r in records {
        let c = cells.entry(key_of(r)).or_default();
        if r.failure.is_some() {
            c.unparseable += 1;
        } else {
            c.add(r.secret_identity, r.parsed);
        }
    }
    cells
}

pub fn aggregate_run(dir: &Path) -> Result<Aggregate, StoreError> {
    let run = RunDir::open(dir);
    let (records, corrupt) = run.load_trials()?;
    let manifest = run.manifest().ok();
    let cells = count_records(records.values());
    let models = match &manifest {
        Some(m) => m.plan.models.clone(),
        None => {
            let set: BTreeSet<String> =
                cells.keys().flat_map(|k| [k.actor.clone(), k.target.clone()]).collect();
            set.into_iter().collect()
        }
    };
    let expected = manifest.as_ref().map(|m| u64::from(m.plan.trials_per_ordered_pair));
    let mut warnings = Vec::new();
    for (k, c) in &cells {
        if c.unparseable > 0 {
            warnings.push(format!(
                "{} -> {} (judge {}): {} record(s) without a verdict excluded",
                k.actor, k.target, k.judge, c.unparseable
            ));
        }
        if let Some(n) = expected {
            if c.analyzable() < n {
                warnings.push(format!("{} -> {}: {} of {} analyzable", k.actor, k.target, c.analyzable(), n));
            }
        }
    }
    if let Some(m) = &manifest {
        for (a, b) in m.plan.pairs() {
            if !cells.keys().any(|k| k.actor == a && k.target == b) {
                warnings.push(format!("{a} -> {b}: no records"));
            }
        }
    }
    for (p, e) in &corrupt {
        warnings.push(format!("corrupt trial file {}: {e}", p.display()));
    }
    Ok(Aggregate { models, cells, corrupt, warnings, expected_per_cell: expected })
}

/// Writes `aggregate.csv` into the run directory.
pub fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<PathBuf, StoreError> {
    let path = dir.join("aggregate.csv");
    write_atomic(&path, &agg.to_csv()?)?;
    Ok(path)
}
