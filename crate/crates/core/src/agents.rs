//! Deterministic scripted agents and tabular probabilistic agents.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{
    Agent, AgentFailure, ChatRole, ChatTurn, FailureClass, ProtocolVariant, Roster, RouteInfo, Seat,
};
use crate::tabular::{Symbol, TabularAgent};

/// Reply emitted when the most recent incoming message contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub contains: String,
    pub reply: String,
}

/// Ordered replies plus optional triggers. At least one reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScript")]
pub struct Script {
    replies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    triggers: Vec<Trigger>,
}

#[derive(Deserialize)]
struct RawScript {
    replies: Vec<String>,
    #[serde(default)]
    triggers: Vec<Trigger>,
}

impl TryFrom<RawScript> for Script {
    type Error = &'static str;

    fn try_from(raw: RawScript) -> Result<Self, Self::Error> {
        Script::new(raw.replies).map(|s| s.with_triggers(raw.triggers))
    }
}

impl Script {
    pub fn new<I, S>(replies: I) -> Result<Self, &'static str>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        if replies.is_empty() {
            return Err("script needs at least one reply");
        }
        Ok(Script { replies, triggers: Vec::new() })
    }

    pub fn with_triggers(mut self, triggers: Vec<Trigger>) -> Self {
        self.triggers = triggers;
        self
    }

    pub fn replies(&self) -> &[String] {
        &self.replies
    }

    /// Reply for a history: a trigger matching the last incoming message wins;
    /// otherwise the reply indexed by the number of prior own turns, with the
    /// final reply repeated once the list is exhausted.
    pub fn reply_for(&self, history: &[ChatTurn]) -> &str {
        let last_in = history.iter().rev().find(|t| t.role == ChatRole::User);
        if let Some(turn) = last_in {
            let text = turn.visible().unwrap_or(&turn.content);
            if let Some(t) = self.triggers.iter().find(|t| text.contains(t.contains.as_str())) {
                return &t.reply;
            }
        }
        let own = history.iter().filter(|t| t.role == ChatRole::Assistant).count();
        &self.replies[own.min(self.replies.len() - 1)]
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    script: Arc<Script>,
    name: String,
}

impl ScriptedAgent {
    pub fn new(script: Arc<Script>, name: impl Into<String>) -> Self {
        ScriptedAgent { script, name: name.into() }
    }
}

impl Agent for ScriptedAgent {
    fn respond(&mut self, history: &[ChatTurn]) -> Result<String, AgentFailure> {
        Ok(self.script.reply_for(history).to_string())
    }

    fn route(&self) -> RouteInfo {
        RouteInfo {
            backend: "scripted".into(),
            model_id: Some(self.name.clone()),
            ..Default::default()
        }
    }
}

/// Text form of symbols for tabular agents talking through the protocol.
///
/// Message symbol `i` is the name at index `i`; verdicts are rendered as
/// answer tags so that the protocol parser reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolNames {
    names: Vec<String>,
}

impl SymbolNames {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SymbolNames { names: names.into_iter().map(Into::into).collect() }
    }

    /// Names `s0`, `s1`, ...
    pub fn numbered(count: u16) -> Self {
        Self::new((0..count).map(|i| format!("s{i}")))
    }

    pub fn render(&self, symbol: Symbol) -> Option<String> {
        match symbol.verdict_bit() {
            Some(bit) => Some(format!("<answer>{}</answer>", u8::from(bit))),
            None => {
                let name = self.names.get(usize::from(symbol.unmarked().0))?;
                Some(if symbol.is_marked() { format!("^{name}") } else { name.clone() })
            }
        }
    }

    pub fn parse(&self, text: &str) -> Option<Symbol> {
        let text = text.trim();
        let (marked, bare) = match text.strip_prefix('^') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let i = self.names.iter().position(|n| n == bare)?;
        let sym = Symbol::message(u16::try_from(i).ok()?);
        Some(if marked { sym.marked() } else { sym })
    }
}

/// Agent that samples a [`TabularAgent`] keyed on the visible transcript.
#[derive(Debug, Clone)]
pub struct TabularBackend {
    table: Arc<TabularAgent>,
    names: Arc<SymbolNames>,
    rng: ChaCha8Rng,
    label: String,
}

impl TabularBackend {
    pub fn new(table: Arc<TabularAgent>, names: Arc<SymbolNames>, seed: u64, label: impl Into<String>) -> Self {
        TabularBackend { table, names, rng: ChaCha8Rng::seed_from_u64(seed), label: label.into() }
    }

    /// Symbol sequence of the visible transcript.
    pub fn context(&self, history: &[ChatTurn]) -> Result<Vec<Symbol>, AgentFailure> {
        history
            .iter()
            .filter_map(ChatTurn::visible)
            .map(|text| {
                self.names.parse(text).ok_or_else(|| {
                    AgentFailure::new(FailureClass::Domain, format!("unknown symbol text {text:?}"))
                })
            })
            .collect()
    }
}

impl Agent for TabularBackend {
    fn respond(&mut self, history: &[ChatTurn]) -> Result<String, AgentFailure> {
        let ctx = self.context(history)?;
        let sym = self
            .table
            .sample(&ctx, &mut self.rng)
            .map_err(|e| AgentFailure::new(FailureClass::Domain, e.to_string()))?;
        self.names
            .render(sym)
            .ok_or_else(|| AgentFailure::new(FailureClass::Domain, format!("symbol {sym:?} has no name")))
    }

    fn route(&self) -> RouteInfo {
        RouteInfo { backend: "tabular".into(), model_id: Some(self.label.clone()), ..Default::default() }
    }
}

/// Role-conditioned tables of one synthetic model.
#[derive(Debug, Clone, Default)]
pub struct TabularModel {
    /// Behaviour as a fresh instance (interlocutor or specimen).
    pub as_self: Option<Arc<TabularAgent>>,
    pub as_distinguisher: Option<Arc<TabularAgent>>,
    /// Imitation tables by target; `imitating_any` covers the rest.
    pub imitating: BTreeMap<String, Arc<TabularAgent>>,
    pub imitating_any: Option<Arc<TabularAgent>>,
}

/// Either kind of pure agent.
#[derive(Debug, Clone)]
pub enum PureModel {
    Scripted(Arc<Script>),
    /// Scripts per seat, with a fallback for unlisted seats.
    SeatScripted { by_seat: BTreeMap<Seat, Arc<Script>>, fallback: Arc<Script> },
    Tabular(TabularModel),
}

/// Roster over in-memory pure models.
#[derive(Debug, Clone, Default)]
pub struct PureRoster {
    models: BTreeMap<String, PureModel>,
    names: Option<Arc<SymbolNames>>,
    slugs: BTreeMap<String, String>,
}

impl PureRoster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_symbols(mut self, names: SymbolNames) -> Self {
        self.names = Some(Arc::new(names));
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, model: PureModel) -> &mut Self {
        self.models.insert(name.into(), model);
        self
    }

    pub fn set_slug(&mut self, model: impl Into<String>, slug: impl Into<String>) -> &mut Self {
        self.slugs.insert(model.into(), slug.into());
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.models.contains_key(name)
    }
}

impl Roster for PureRoster {
    fn spawn(
        &mut self,
        seat: Seat,
        variant: &ProtocolVariant,
        seed: u64,
    ) -> Result<Box<dyn Agent>, AgentFailure> {
        let model = variant.model_for(seat);
        let unknown = || AgentFailure::new(FailureClass::Unavailable, format!("unknown model {model:?}"));
        match self.models.get(model).ok_or_else(unknown)? {
            PureModel::Scripted(s) => Ok(Box::new(ScriptedAgent::new(s.clone(), model))),
            PureModel::SeatScripted { by_seat, fallback } => {
                let s = by_seat.get(&seat).unwrap_or(fallback);
                Ok(Box::new(ScriptedAgent::new(s.clone(), model)))
            }
            PureModel::Tabular(m) => {
                let table = match seat {
                    Seat::Actor => m.imitating.get(&variant.target).or(m.imitating_any.as_ref()),
                    Seat::Distinguisher => m.as_distinguisher.as_ref(),
                    Seat::Target | Seat::Specimen | Seat::DistinguisherSpecimen => m.as_self.as_ref(),
                };
                let table = table.ok_or_else(|| {
                    AgentFailure::new(FailureClass::Domain, format!("model {model:?} has no table for {seat:?}"))
                })?;
                let names = self.names.clone().ok_or_else(|| {
                    AgentFailure::new(FailureClass::Domain, "tabular roster without symbol names")
                })?;
                Ok(Box::new(TabularBackend::new(table.clone(), names, seed, model)))
            }
        }
    }

    fn slug(&self, model: &str) -> String {
        self.slugs.get(model).cloned().unwrap_or_else(|| model.into())
    }
}
