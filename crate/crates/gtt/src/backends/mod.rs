//! Agent specifications and the roster that turns them into live agents.

pub mod human;
pub mod remote;
pub mod retry;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use gtt_core::agents::{Script, ScriptedAgent, SymbolNames, TabularBackend, Trigger};
use gtt_core::protocol::{Agent, AgentFailure, FailureClass, ProtocolVariant, Roster, Seat};
use gtt_core::TabularAgent;
use serde::{Deserialize, Serialize};

pub use human::{HumanInput, HumanRelay};
pub use remote::{RemoteAgent, RemoteBackend, RemoteSpec};
pub use retry::{RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSpec {
    pub replies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
    /// Per-seat scripts overriding `replies`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub seats: BTreeMap<Seat, Script>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSpec {
    /// Text of message symbol `i`.
    pub symbols: Vec<String>,
    #[serde(default)]
    pub as_self: Option<TabularAgent>,
    #[serde(default)]
    pub as_distinguisher: Option<TabularAgent>,
    #[serde(default)]
    pub imitating: BTreeMap<String, TabularAgent>,
    #[serde(default)]
    pub imitating_any: Option<TabularAgent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Remote(RemoteSpec),
    Scripted(ScriptedSpec),
    Tabular(TabularSpec),
    /// Seat filled by a person through the arena.
    HumanRelay,
}

/// A named model: how to run it plus the name rendered into prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slug: Option<String>,
    #[serde(flatten)]
    pub spec: AgentSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("model {model}: {reason}")]
    Invalid { model: String, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
}

/// Parses a `[models.NAME]` TOML document.
pub fn parse_models(text: &str, origin: &str) -> Result<BTreeMap<String, ModelEntry>, SpecError> {
    #[derive(Deserialize)]
    struct File {
        models: BTreeMap<String, ModelEntry>,
    }
    toml::from_str::<File>(text)
        .map(|f| f.models)
        .map_err(|source| SpecError::Toml { path: origin.into(), source })
}

pub fn load_models(path: &Path) -> Result<BTreeMap<String, ModelEntry>, SpecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
    parse_models(&text, &path.display().to_string())
}

/// Builds an agent for a seat; used for in-process test doubles.
pub type AgentFactory =
    Arc<dyn Fn(Seat, &ProtocolVariant, u64) -> Result<Box<dyn Agent>, AgentFailure> + Send + Sync>;

enum Resolved {
    Remote(Arc<RemoteBackend>),
    Scripted { fallback: Arc<Script>, seats: BTreeMap<Seat, Arc<Script>> },
    Tabular { names: Arc<SymbolNames>, model: gtt_core::agents::TabularModel },
    Human,
    Custom(AgentFactory),
}

struct Model {
    slug: String,
    kind: Resolved,
}

/// Resolved model table. Cheap to clone and shareable across threads.
#[derive(Clone, Default)]
pub struct Registry {
    models: Arc<BTreeMap<String, Model>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("models", &self.models.keys().collect::<Vec<_>>()).finish()
    }
}

fn invalid(model: &str, reason: impl fmt::Display) -> SpecError {
    SpecError::Invalid { model: model.into(), reason: reason.to_string() }
}

impl Registry {
    /// Resolves every entry; remote endpoints and credentials come from the
    /// spec or the environment.
    pub fn build(
        entries: &BTreeMap<String, ModelEntry>,
        sleeper: Arc<dyn Sleeper>,
    ) -> Result<Self, SpecError> {
        let mut b = RegistryBuilder::default();
        for (name, e) in entries {
            let kind = match &e.spec {
                AgentSpec::Remote(r) => Resolved::Remote(Arc::new(
                    RemoteBackend::from_env(r.clone(), sleeper.clone()).map_err(|err| invalid(name, err))?,
                )),
                AgentSpec::Scripted(s) => {
                    let fallback = Script::new(s.replies.clone())
                        .map_err(|err| invalid(name, err))?
                        .with_triggers(s.triggers.clone());
                    let seats = s.seats.iter().map(|(k, v)| (*k, Arc::new(v.clone()))).collect();
                    Resolved::Scripted { fallback: Arc::new(fallback), seats }
                }
                AgentSpec::Tabular(t) => {
                    let k = t.symbols.len();
                    for (role, table) in [("as_self", &t.as_self), ("as_distinguisher", &t.as_distinguisher)]
                        .into_iter()
                        .chain([("imitating_any", &t.imitating_any)])
                    {
                        if let Some(table) = table {
                            check_symbols(table, k).map_err(|r| invalid(name, format!("{role}: {r}")))?;
                        }
                    }
                    for (target, table) in &t.imitating {
                        check_symbols(table, k).map_err(|r| invalid(name, format!("imitating {target}: {r}")))?;
                    }
                    let arc = |t: &Option<TabularAgent>| t.clone().map(Arc::new);
                    Resolved::Tabular {
                        names: Arc::new(SymbolNames::new(t.symbols.clone())),
                        model: gtt_core::agents::TabularModel {
                            as_self: arc(&t.as_self),
                            as_distinguisher: arc(&t.as_distinguisher),
                            imitating: t.imitating.iter().map(|(k, v)| (k.clone(), Arc::new(v.clone()))).collect(),
                            imitating_any: arc(&t.imitating_any),
                        },
                    }
                }
                AgentSpec::HumanRelay => Resolved::Human,
            };
            let slug = e.slug.clone().unwrap_or_else(|| match &e.spec {
                AgentSpec::Remote(r) => r.model_id.clone(),
                _ => name.clone(),
            });
            b.models.insert(name.clone(), Model { slug, kind });
        }
        Ok(b.build())
    }

    pub fn builder() -> RegistryBuilder {
        RegistryBuilder::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.models.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn is_human(&self, name: &str) -> bool {
        matches!(self.models.get(name).map(|m| &m.kind), Some(Resolved::Human))
    }

    /// Remote spec of a model, if it is remote.
    pub fn remote(&self, name: &str) -> Option<&RemoteSpec> {
        match &self.models.get(name)?.kind {
            Resolved::Remote(b) => Some(b.spec()),
            _ => None,
        }
    }
}

fn check_symbols(t: &TabularAgent, k: usize) -> Result<(), String> {
    let bad = t
        .outputs()
        .iter()
        .chain(t.contexts().flatten())
        .find(|s| !s.is_verdict() && usize::from(s.unmarked().0) >= k);
    match bad {
        Some(s) => Err(format!("symbol {s:?} has no text form")),
        None => Ok(()),
    }
}

#[derive(Default)]
pub struct RegistryBuilder {
    models: BTreeMap<String, Model>,
}

impl RegistryBuilder {
    pub fn scripted(mut self, name: &str, replies: &[&str]) -> Self {
        let script = Script::new(replies.iter().copied()).expect("at least one reply");
        self.models.insert(
            name.into(),
            Model { slug: name.into(), kind: Resolved::Scripted { fallback: Arc::new(script), seats: BTreeMap::new() } },
        );
        self
    }

    pub fn remote(mut self, name: &str, backend: RemoteBackend) -> Self {
        let slug = backend.spec().model_id.clone();
        self.models.insert(name.into(), Model { slug, kind: Resolved::Remote(Arc::new(backend)) });
        self
    }

    pub fn custom(mut self, name: &str, factory: AgentFactory) -> Self {
        self.models.insert(name.into(), Model { slug: name.into(), kind: Resolved::Custom(factory) });
        self
    }

    pub fn human(mut self, name: &str) -> Self {
        self.models.insert(name.into(), Model { slug: name.into(), kind: Resolved::Human });
        self
    }

    pub fn build(self) -> Registry {
        Registry { models: Arc::new(self.models) }
    }
}

impl Roster for Registry {
    fn spawn(&mut self, seat: Seat, variant: &ProtocolVariant, seed: u64) -> Result<Box<dyn Agent>, AgentFailure> {
        let name = variant.model_for(seat);
        let model = self
            .models
            .get(name)
            .ok_or_else(|| AgentFailure::new(FailureClass::Unavailable, format!("unknown model {name:?}")))?;
        match &model.kind {
            Resolved::Remote(b) => Ok(Box::new(RemoteAgent::new(b.clone(), seed))),
            Resolved::Scripted { fallback, seats } => {
                let s = seats.get(&seat).unwrap_or(fallback);
                Ok(Box::new(ScriptedAgent::new(s.clone(), name)))
            }
            Resolved::Tabular { names, model: m } => {
                let table = match seat {
                    Seat::Actor => m.imitating.get(&variant.target).or(m.imitating_any.as_ref()),
                    Seat::Distinguisher => m.as_distinguisher.as_ref(),
                    Seat::Target | Seat::Specimen | Seat::DistinguisherSpecimen => m.as_self.as_ref(),
                };
                let table = table.ok_or_else(|| {
                    AgentFailure::new(FailureClass::Domain, format!("model {name:?} has no table for {seat:?}"))
                })?;
                Ok(Box::new(TabularBackend::new(table.clone(), names.clone(), seed, name)))
            }
            Resolved::Human => Err(AgentFailure::new(
                FailureClass::Unavailable,
                format!("model {name:?} is a human relay and needs a live session"),
            )),
            Resolved::Custom(f) => f(seat, variant, seed),
        }
    }

    fn slug(&self, model: &str) -> String {
        self.models.get(model).map(|m| m.slug.clone()).unwrap_or_else(|| model.into())
    }
}

/// Roster that seats a [`HumanRelay`] wherever `human` is placed and
/// delegates everything else.
pub struct HumanSeatRoster {
    pub inner: Registry,
    pub human: String,
    relay: Option<HumanRelay>,
}

impl HumanSeatRoster {
    pub fn new(inner: Registry, human: impl Into<String>, relay: HumanRelay) -> Self {
        HumanSeatRoster { inner, human: human.into(), relay: Some(relay) }
    }
}

impl Roster for HumanSeatRoster {
    fn spawn(&mut self, seat: Seat, variant: &ProtocolVariant, seed: u64) -> Result<Box<dyn Agent>, AgentFailure> {
        if variant.model_for(seat) == self.human {
            return match self.relay.take() {
                Some(r) => Ok(Box::new(r)),
                None => Err(AgentFailure::new(FailureClass::Domain, "human can hold only one seat")),
            };
        }
        self.inner.spawn(seat, variant, seed)
    }

    fn slug(&self, model: &str) -> String {
        self.inner.slug(model)
    }
}
