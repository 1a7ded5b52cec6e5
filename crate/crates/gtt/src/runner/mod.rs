//! Pairwise campaigns over a model list.

pub mod plan;
pub mod store;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::Utc;
use gtt_core::protocol::{EnvBlock, TrialRecord, run_trial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::SystemClock;
use crate::backends::Registry;
pub use plan::{CampaignPlan, PlanError, ProtocolSpec, SecretMode, Slot};
pub use store::{Manifest, ResultRow, RunDir, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("models missing from the agent table: {0:?}")]
    UnknownModels(Vec<String>),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Overrides the plan's parallelism.
    pub parallelism: Option<usize>,
    /// Stamped on the manifest and every record; captured when absent.
    pub env: Option<EnvBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shortfall {
    pub trial_id: String,
    pub attempts: u32,
    pub last_error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub pairs: usize,
    pub requested: usize,
    /// Trials already on disk when the run started.
    pub already_done: usize,
    pub completed_now: usize,
    pub failed_attempts: u32,
    pub shortfalls: Vec<Shortfall>,
    pub corrupt: Vec<(PathBuf, String)>,
}

impl RunSummary {
    pub fn is_complete(&self) -> bool {
        self.shortfalls.is_empty() && self.corrupt.is_empty()
    }
}

enum SlotOutcome {
    Done { failed: u32 },
    Short { failed: u32, shortfall: Shortfall },
}

/// Runs every missing trial of `plan` into `out`. Trials already present are
/// never rerun, so repeating a finished run makes no agent calls.
pub fn run_campaign(
    plan: &CampaignPlan,
    registry: &Registry,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    plan.validate()?;
    let mut needed: BTreeSet<&str> = plan.models.iter().map(String::as_str).collect();
    needed.extend(plan.protocol.fixed_distinguisher.as_deref());
    let missing: Vec<String> = needed.iter().filter(|m| !registry.contains(m)).map(|m| m.to_string()).collect();
    if !missing.is_empty() {
        return Err(RunError::UnknownModels(missing));
    }
    let dir = RunDir::open(out);
    let env = opts.env.clone().unwrap_or_else(|| crate::env::capture(Path::new(".")));
    let manifest = dir.prepare(plan, &env, opts.resume)?;
    let env = manifest.env.clone();

    let (existing, corrupt) = dir.load_trials()?;
    let corrupt_ids: BTreeSet<String> = corrupt
        .iter()
        .filter_map(|(p, _)| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect();
    let failed_before = dir.failed_counts()?;
    let slots = plan.slots();
    let pending: Vec<&Slot> = slots
        .iter()
        .filter(|s| {
            let id = s.trial_id();
            !existing.contains_key(&id) && !corrupt_ids.contains(&id)
        })
        .collect();
    let already_done = slots.iter().filter(|s| existing.contains_key(&s.trial_id())).count();

    let threads = opts.parallelism.unwrap_or(plan.parallelism).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let outcomes: Vec<SlotOutcome> = pool.install(|| {
        pending
            .par_iter()
            .map(|slot| {
                let prior = failed_before.get(&slot.trial_id()).copied().unwrap_or(0);
                run_slot(plan, registry, &dir, &env, slot, prior)
            })
            .collect::<Result<_, StoreError>>()
    })?;

    let mut summary = RunSummary {
        pairs: plan.pairs().len(),
        requested: slots.len(),
        already_done,
        corrupt,
        ..Default::default()
    };
    for o in outcomes {
        match o {
            SlotOutcome::Done { failed } => {
                summary.completed_now += 1;
                summary.failed_attempts += failed;
            }
            SlotOutcome::Short { failed, shortfall } => {
                summary.failed_attempts += failed;
                summary.shortfalls.push(shortfall);
            }
        }
    }
    summary.shortfalls.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));

    let (all, _) = dir.load_trials()?;
    dir.write_results(all.values())?;
    Ok(summary)
}

fn run_slot(
    plan: &CampaignPlan,
    registry: &Registry,
    dir: &RunDir,
    env: &EnvBlock,
    slot: &Slot,
    prior_failures: u32,
) -> Result<SlotOutcome, StoreError> {
    let secret = plan.cell_secrets(&slot.actor, &slot.target)[slot.k as usize];
    let mut roster = registry.clone();
    let id = slot.trial_id();
    let mut last_error = String::new();
    for i in 0..plan.max_attempts_per_trial {
        let attempt = prior_failures + i + 1;
        let config = plan.trial_config(slot, attempt, Some(secret));
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut rec: TrialRecord =
            run_trial(&config, &mut roster, &SystemClock, &mut rng).expect("plan validated the trial config");
        rec.attempt_index = attempt;
        rec.env = env.clone();
        if rec.is_analyzable() {
            store::write_json(&dir.trial_path(&id), &rec)?;
            return Ok(SlotOutcome::Done { failed: i });
        }
        last_error = match &rec.failure {
            Some(f) => format!("{:?} {}: {}", f.seat, f.model, f.failure),
            None => "unparseable verdict".into(),
        };
        tracing::warn!(trial = %id, attempt, error = %last_error, "attempt failed");
        store::write_json(&dir.failed_path(&id, attempt, Utc::now()), &rec)?;
    }
    let failed = plan.max_attempts_per_trial;
    Ok(SlotOutcome::Short {
        failed,
        shortfall: Shortfall { trial_id: id, attempts: prior_failures + failed, last_error },
    })
}
