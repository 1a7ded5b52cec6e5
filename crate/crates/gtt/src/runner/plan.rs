//! Campaign plan files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gtt_core::protocol::{
    ConfigError, DEFAULT_MAX_DISTINGUISHER_TURNS, DEFAULT_MAX_SPECIMEN_TURNS, ProtocolVariant, SecretIdentity,
    TrialConfig, validate_config,
};
use gtt_core::seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{ModelEntry, SpecError, load_models};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSpec {
    pub fixed_distinguisher: Option<String>,
    pub actor_query_phase: bool,
    pub distinguisher_query_phase: bool,
    pub max_distinguisher_turns: u32,
    pub max_specimen_turns: u32,
    pub controlled_turn_budget: Option<u32>,
    pub controlled_query_budget: Option<u32>,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            fixed_distinguisher: None,
            actor_query_phase: false,
            distinguisher_query_phase: false,
            max_distinguisher_turns: DEFAULT_MAX_DISTINGUISHER_TURNS,
            max_specimen_turns: DEFAULT_MAX_SPECIMEN_TURNS,
            controlled_turn_budget: None,
            controlled_query_budget: None,
        }
    }
}

/// How secrets are assigned within a cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretMode {
    /// Half target, half imitator per cell (odd counts: the extra one by coin).
    #[default]
    Stratified,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignPlan {
    pub models: Vec<String>,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    #[serde(default = "ten")]
    pub trials_per_ordered_pair: u32,
    #[serde(default = "yes")]
    pub include_self_pairs: bool,
    /// Attempts per requested trial within one invocation.
    #[serde(default = "three")]
    pub max_attempts_per_trial: u32,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub secrets: SecretMode,
    /// Inline model table; merged with `agents_file`.
    #[serde(default)]
    pub agents: BTreeMap<String, ModelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents_file: Option<PathBuf>,
}

fn ten() -> u32 {
    10
}
fn yes() -> bool {
    true
}
fn three() -> u32 {
    3
}
fn one() -> usize {
    1
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One requested trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub actor: String,
    pub target: String,
    pub k: u32,
}

impl Slot {
    pub fn trial_id(&self) -> String {
        trial_id(&self.actor, &self.target, self.k)
    }
}

pub fn trial_id(actor: &str, target: &str, k: u32) -> String {
    format!("{actor}__{target}__t{k:03}")
}

pub fn pair_label(actor: &str, target: &str) -> String {
    format!("{actor}__{target}")
}

const SECRET_STREAM: u64 = 0x5ec2e7;

fn safe_name(s: &str) -> bool {
    !s.is_empty()
        && !s.contains("__")
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
        && !s.starts_with('.')
}

impl CampaignPlan {
    pub fn parse(text: &str, origin: &str) -> Result<Self, PlanError> {
        toml::from_str(text).map_err(|source| PlanError::Toml { path: origin.into(), source })
    }

    /// Reads a plan and inlines its `agents_file` (relative to the plan).
    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PlanError::Io { path: path.display().to_string(), source })?;
        let mut plan = Self::parse(&text, &path.display().to_string())?;
        if let Some(f) = plan.agents_file.take() {
            let full = path.parent().unwrap_or(Path::new(".")).join(f);
            for (k, v) in load_models(&full)? {
                plan.agents.entry(k).or_insert(v);
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Invalid(m));
        if self.models.is_empty() {
            return bad("no models".into());
        }
        if self.models.len() < 2 && !self.include_self_pairs {
            return bad("need two models unless self-pairs are included".into());
        }
        if self.trials_per_ordered_pair == 0 || self.max_attempts_per_trial == 0 || self.parallelism == 0 {
            return bad("counts must be at least 1".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !safe_name(m) {
                return bad(format!("model name {m:?} must be [A-Za-z0-9._-] without \"__\""));
            }
            if !seen.insert(m) {
                return bad(format!("model {m:?} listed twice"));
            }
        }
        if let Some(first) = self.slots().first() {
            validate_config(&self.trial_config(first, 1, None))?;
        }
        Ok(())
    }

    pub fn variant(&self, actor: &str, target: &str) -> ProtocolVariant {
        ProtocolVariant {
            actor: actor.into(),
            target: target.into(),
            fixed_distinguisher: self.protocol.fixed_distinguisher.clone(),
            actor_query_phase: self.protocol.actor_query_phase,
            distinguisher_query_phase: self.protocol.distinguisher_query_phase,
        }
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for a in &self.models {
            for b in &self.models {
                if a != b || self.include_self_pairs {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    pub fn slots(&self) -> Vec<Slot> {
        self.pairs()
            .into_iter()
            .flat_map(|(a, b)| {
                (0..self.trials_per_ordered_pair).map(move |k| Slot { actor: a.clone(), target: b.clone(), k })
            })
            .collect()
    }

    /// Secret for every trial slot of a cell. Fixed per slot, so retries do not
    /// shift the branch balance.
    pub fn cell_secrets(&self, actor: &str, target: &str) -> Vec<SecretIdentity> {
        let n = self.trials_per_ordered_pair as usize;
        let base = seed::derive(self.seed, &[SECRET_STREAM, seed::hash_str(actor), seed::hash_str(target)]);
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        match self.secrets {
            SecretMode::Stratified => {
                let mut v: Vec<SecretIdentity> = (0..n)
                    .map(|i| if i < n / 2 { SecretIdentity::Target } else { SecretIdentity::Imitator })
                    .collect();
                if n % 2 == 1 && rng.random_bool(0.5) {
                    v[n - 1] = SecretIdentity::Target;
                }
                v.shuffle(&mut rng);
                v
            }
            SecretMode::Iid => (0..n)
                .map(|_| if rng.random_bool(0.5) { SecretIdentity::Target } else { SecretIdentity::Imitator })
                .collect(),
        }
    }

    pub fn trial_seed(&self, slot: &Slot, attempt: u32) -> u64 {
        seed::derive(
            self.seed,
            &[seed::hash_str(&slot.actor), seed::hash_str(&slot.target), u64::from(slot.k), u64::from(attempt)],
        )
    }

    pub fn trial_config(&self, slot: &Slot, attempt: u32, secret: Option<SecretIdentity>) -> TrialConfig {
        let mut c = TrialConfig::new(slot.trial_id(), self.variant(&slot.actor, &slot.target), self.trial_seed(slot, attempt));
        c.max_distinguisher_turns = self.protocol.max_distinguisher_turns;
        c.max_specimen_turns = self.protocol.max_specimen_turns;
        c.controlled_turn_budget = self.protocol.controlled_turn_budget;
        c.controlled_query_budget = self.protocol.controlled_query_budget;
        c.secret = secret;
        c
    }

    /// Hex SHA-256 of everything that determines the trials (parallelism
    /// excluded, so a resume may change it).
    pub fn identity_hash(&self) -> String {
        let mut id = self.clone();
        id.parallelism = 0;
        id.agents_file = None;
        let bytes = serde_json::to_vec(&id).expect("plan serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
