//! Run directory layout.
//!
//! ```text
//! DIR/manifest.json
//! DIR/trials/{actor}__{target}__t{k:03}.json    analyzable records
//! DIR/failed/{trial_id}__a{n}__{timestamp}.json  unrecovered attempts
//! DIR/results.csv
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use gtt_core::protocol::{Channel, EnvBlock, ParsedAnswer, SecretIdentity, TrialRecord};
use serde::{Deserialize, Serialize};

use super::plan::{CampaignPlan, pair_label};

pub const MANIFEST: &str = "manifest.json";
pub const TRIALS: &str = "trials";
pub const FAILED: &str = "failed";
pub const RESULTS: &str = "results.csv";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub plan_hash: String,
    pub plan: CampaignPlan,
    pub env: EnvBlock,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0} is not empty and holds no resumable run (use --resume on a run directory)")]
    NotEmpty(PathBuf),
    #[error("{0} holds a run; pass --resume to continue it")]
    NeedsResume(PathBuf),
    #[error("plan differs from the run in {dir} (hash {found}, expected {expected})")]
    PlanMismatch { dir: PathBuf, found: String, expected: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir).map_err(io(path))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let bytes = serde_json::to_vec_pretty(value)
        .map_err(|source| StoreError::Json { path: path.to_path_buf(), source })?;
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = std::fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&text).map_err(|source| StoreError::Json { path: path.to_path_buf(), source })
}

/// A trial file that failed to load, with the reason.
pub type BadFile = (PathBuf, String);

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST)
    }

    pub fn trials_dir(&self) -> PathBuf {
        self.root.join(TRIALS)
    }

    pub fn failed_dir(&self) -> PathBuf {
        self.root.join(FAILED)
    }

    pub fn trial_path(&self, trial_id: &str) -> PathBuf {
        self.trials_dir().join(format!("{trial_id}.json"))
    }

    pub fn manifest(&self) -> Result<Manifest, StoreError> {
        read_json(&self.manifest_path())
    }

    /// Creates a fresh run or checks that an existing one matches `plan`.
    pub fn prepare(&self, plan: &CampaignPlan, env: &EnvBlock, resume: bool) -> Result<Manifest, StoreError> {
        let hash = plan.identity_hash();
        if self.manifest_path().exists() {
            if !resume {
                return Err(StoreError::NeedsResume(self.root.clone()));
            }
            let m = self.manifest()?;
            if m.plan_hash != hash {
                return Err(StoreError::PlanMismatch { dir: self.root.clone(), found: m.plan_hash, expected: hash });
            }
            for d in [self.trials_dir(), self.failed_dir()] {
                std::fs::create_dir_all(&d).map_err(io(&d))?;
            }
            return Ok(m);
        }
        if self.root.exists() {
            let mut entries = std::fs::read_dir(&self.root).map_err(io(&self.root))?;
            if entries.next().is_some() {
                return Err(StoreError::NotEmpty(self.root.clone()));
            }
        }
        for d in [self.trials_dir(), self.failed_dir()] {
            std::fs::create_dir_all(&d).map_err(io(&d))?;
        }
        let mut stored = plan.clone();
        stored.agents_file = None;
        let m = Manifest {
            schema_version: MANIFEST_VERSION,
            plan_hash: hash,
            plan: stored,
            env: env.clone(),
            created_at: Utc::now(),
        };
        write_json(&self.manifest_path(), &m)?;
        Ok(m)
    }

    /// `.json` files of a subdirectory, sorted; temporaries skipped.
    pub fn list(&self, sub: &str) -> Result<Vec<PathBuf>, StoreError> {
        let dir = self.root.join(sub);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for e in std::fs::read_dir(&dir).map_err(io(&dir))? {
            let p = e.map_err(io(&dir))?.path();
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if !name.starts_with(".tmp") && name.ends_with(".json") {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Analyzable records keyed by trial id, plus files that failed to load.
    pub fn load_trials(&self) -> Result<(BTreeMap<String, TrialRecord>, Vec<BadFile>), StoreError> {
        let mut good = BTreeMap::new();
        let mut bad = Vec::new();
        for p in self.list(TRIALS)? {
            match read_json::<TrialRecord>(&p) {
                Ok(r) => match r.check_invariants() {
                    Ok(()) if stem(&p) == r.trial_id => {
                        good.insert(r.trial_id.clone(), r);
                    }
                    Ok(()) => bad.push((p, format!("file name does not match trial id {:?}", r.trial_id))),
                    Err(e) => bad.push((p, e.to_string())),
                },
                Err(e) => bad.push((p, e.to_string())),
            }
        }
        Ok((good, bad))
    }

    /// Number of failed-attempt files per trial id.
    pub fn failed_counts(&self) -> Result<BTreeMap<String, u32>, StoreError> {
        let mut out = BTreeMap::new();
        for p in self.list(FAILED)? {
            if let Some((id, _)) = stem(&p).split_once("__a") {
                *out.entry(id.to_string()).or_insert(0) += 1;
            }
        }
        Ok(out)
    }

    pub fn failed_path(&self, trial_id: &str, attempt: u32, at: DateTime<Utc>) -> PathBuf {
        let ts = at.format("%Y%m%dT%H%M%S%.3fZ");
        self.failed_dir().join(format!("{trial_id}__a{attempt}__{ts}.json"))
    }

    /// Rewrites results.csv from the given records.
    pub fn write_results<'a>(&self, records: impl IntoIterator<Item = &'a TrialRecord>) -> Result<(), StoreError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(RESULT_COLUMNS)?;
        for r in records {
            w.serialize(ResultRow::from(r))?;
        }
        let bytes = w.into_inner().map_err(|e| StoreError::Io {
            path: self.root.join(RESULTS),
            source: std::io::Error::other(e.to_string()),
        })?;
        write_atomic(&self.root.join(RESULTS), &bytes)
    }
}

fn stem(p: &Path) -> &str {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("")
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "trial_id",
    "pair",
    "secret",
    "verdict",
    "success",
    "turns_main",
    "turns_specimen",
    "opening_answer_flag",
    "attempt_index",
];

/// One row of results.csv.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial_id: String,
    pub pair: String,
    pub secret: SecretIdentity,
    pub verdict: Option<u8>,
    pub success: Option<bool>,
    pub turns_main: u32,
    pub turns_specimen: u32,
    pub opening_answer_flag: bool,
    pub attempt_index: u32,
}

impl From<&TrialRecord> for ResultRow {
    fn from(r: &TrialRecord) -> Self {
        ResultRow {
            trial_id: r.trial_id.clone(),
            pair: pair_label(&r.config.variant.actor, &r.config.variant.target),
            secret: r.secret_identity,
            verdict: r.parsed.bit().map(u8::from),
            success: r.success,
            turns_main: r.messages(Channel::Main).count() as u32,
            turns_specimen: r.messages(Channel::Specimen).count() as u32,
            opening_answer_flag: matches!(r.parsed, ParsedAnswer::OpeningAnswer { .. }),
            attempt_index: r.attempt_index,
        }
    }
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, StoreError> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}
