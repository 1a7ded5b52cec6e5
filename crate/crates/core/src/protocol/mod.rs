//! Single-trial protocol: configuration, transcripts, agents and the trial
//! state machine.

mod answer;
pub mod prompts;
mod trial;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use answer::{ParsedAnswer, last_answer_bit, parse_answer};
pub use trial::{ConfigError, run_trial, run_trial_seeded, success_of, validate_config};

/// Version of the persisted [`TrialRecord`] layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Token an actor returns to end an open specimen stage.
pub const STOP: &str = "STOP";

pub const DEFAULT_MAX_DISTINGUISHER_TURNS: u32 = 40;
pub const DEFAULT_MAX_SPECIMEN_TURNS: u32 = 20;

/// Which game is played and by whom. Models are referenced by roster name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolVariant {
    pub actor: String,
    pub target: String,
    /// Third-party judge; when absent the target model judges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_distinguisher: Option<String>,
    /// Actor interrogates a specimen of the target first.
    #[serde(default)]
    pub actor_query_phase: bool,
    /// Distinguisher interrogates a specimen of the target first (experimental).
    #[serde(default)]
    pub distinguisher_query_phase: bool,
}

impl ProtocolVariant {
    pub fn gtt(actor: impl Into<String>, target: impl Into<String>) -> Self {
        ProtocolVariant {
            actor: actor.into(),
            target: target.into(),
            fixed_distinguisher: None,
            actor_query_phase: false,
            distinguisher_query_phase: false,
        }
    }

    pub fn gttq(actor: impl Into<String>, target: impl Into<String>) -> Self {
        ProtocolVariant { actor_query_phase: true, ..Self::gtt(actor, target) }
    }

    pub fn fixed(
        judge: impl Into<String>,
        actor: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        ProtocolVariant { fixed_distinguisher: Some(judge.into()), ..Self::gtt(actor, target) }
    }

    pub fn distinguisher_model(&self) -> &str {
        self.fixed_distinguisher.as_deref().unwrap_or(&self.target)
    }

    /// Model seated at `seat`.
    pub fn model_for(&self, seat: Seat) -> &str {
        match seat {
            Seat::Actor => &self.actor,
            Seat::Distinguisher => self.distinguisher_model(),
            Seat::Target | Seat::Specimen | Seat::DistinguisherSpecimen => &self.target,
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.fixed_distinguisher.is_some(), self.actor_query_phase, self.distinguisher_query_phase) {
            (_, _, true) => "GDGTT",
            (true, true, false) => "FDGTTQ",
            (true, false, false) => "FDGTT",
            (false, true, false) => "GTTQ",
            (false, false, false) => "GTT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trial_id: String,
    pub variant: ProtocolVariant,
    #[serde(default = "default_dist_turns")]
    pub max_distinguisher_turns: u32,
    #[serde(default = "default_specimen_turns")]
    pub max_specimen_turns: u32,
    /// Exactly-n rounds before the verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controlled_turn_budget: Option<u32>,
    /// Exactly-n specimen queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controlled_query_budget: Option<u32>,
    pub rng_seed: u64,
    /// Preassigned secret (stratified campaigns); a fair coin otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<SecretIdentity>,
}

fn default_dist_turns() -> u32 {
    DEFAULT_MAX_DISTINGUISHER_TURNS
}

fn default_specimen_turns() -> u32 {
    DEFAULT_MAX_SPECIMEN_TURNS
}

impl TrialConfig {
    pub fn new(trial_id: impl Into<String>, variant: ProtocolVariant, rng_seed: u64) -> Self {
        TrialConfig {
            trial_id: trial_id.into(),
            variant,
            max_distinguisher_turns: DEFAULT_MAX_DISTINGUISHER_TURNS,
            max_specimen_turns: DEFAULT_MAX_SPECIMEN_TURNS,
            controlled_turn_budget: None,
            controlled_query_budget: None,
            rng_seed,
            secret: None,
        }
    }

    /// Hard cap on distinguisher messages in the main channel.
    pub fn effective_distinguisher_cap(&self) -> u32 {
        match self.controlled_turn_budget {
            Some(n) => n + 1,
            None => self.max_distinguisher_turns,
        }
    }

    /// Cap on specimen replies in the actor's specimen stage.
    pub fn effective_specimen_cap(&self) -> u32 {
        self.controlled_query_budget.unwrap_or(self.max_specimen_turns)
    }
}

/// Who the distinguisher actually faced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretIdentity {
    /// A fresh instance of the target model.
    Target,
    /// The actor imitating the target.
    Imitator,
}

/// Role slots in a trial. Every seat gets a fresh agent instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seat {
    Actor,
    Distinguisher,
    /// Fresh target acting as the interlocutor when the secret is `Target`.
    Target,
    /// Fresh target queried by the actor.
    Specimen,
    /// Fresh target queried by a querying distinguisher.
    DistinguisherSpecimen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Main,
    Specimen,
    DistinguisherSpecimen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sender {
    Actor,
    Distinguisher,
    Target,
    Specimen,
    Human,
}

/// One message in a trial transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub channel: Channel,
    pub sender: Sender,
    /// Position within its channel, from 0.
    pub index: u32,
    pub content: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnKind {
    /// Role instruction. `embedded` carries a conversation message quoted inside
    /// the instruction (the distinguisher's opening in the actor prompt).
    Instruction { embedded: Option<String> },
    Message,
}

/// One entry of an agent's own view of its conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub kind: TurnKind,
    pub content: String,
}

impl ChatTurn {
    pub fn user(content: impl Into<String>) -> Self {
        ChatTurn { role: ChatRole::User, kind: TurnKind::Message, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatTurn { role: ChatRole::Assistant, kind: TurnKind::Message, content: content.into() }
    }

    pub fn instruction(content: impl Into<String>, embedded: Option<String>) -> Self {
        ChatTurn {
            role: ChatRole::User,
            kind: TurnKind::Instruction { embedded },
            content: content.into(),
        }
    }

    /// Conversation messages visible in this turn: the message itself, or the
    /// embedded message of an instruction.
    pub fn visible(&self) -> Option<&str> {
        match &self.kind {
            TurnKind::Message => Some(&self.content),
            TurnKind::Instruction { embedded } => embedded.as_deref(),
        }
    }
}

/// Provenance of a seat's responses, stored as opaque strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteInfo {
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Timeout,
    Connection,
    RateLimited,
    Server,
    Client,
    Malformed,
    Domain,
    Unavailable,
}

impl FailureClass {
    /// Whether a retry may succeed.
    pub fn is_transient(self) -> bool {
        matches!(
            self,
            FailureClass::Timeout
                | FailureClass::Connection
                | FailureClass::RateLimited
                | FailureClass::Server
        )
    }
}

/// One request attempt made by a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<FailureClass>,
    pub detail: String,
    /// Sleep before the next attempt.
    #[serde(default)]
    pub backoff_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{class:?}: {message}")]
pub struct AgentFailure {
    pub class: FailureClass,
    pub message: String,
    #[serde(default)]
    pub attempts: Vec<AttemptLog>,
}

impl AgentFailure {
    pub fn new(class: FailureClass, message: impl Into<String>) -> Self {
        AgentFailure { class, message: message.into(), attempts: Vec::new() }
    }
}

/// Failure descriptor stored on a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub seat: Seat,
    pub model: String,
    pub failure: AgentFailure,
}

/// A conversational participant. Each instance holds one conversation.
pub trait Agent {
    /// Next message given the agent's full view of the conversation so far,
    /// which ends with a user turn.
    fn respond(&mut self, history: &[ChatTurn]) -> Result<String, AgentFailure>;

    fn route(&self) -> RouteInfo {
        RouteInfo::default()
    }
}

/// Creates fresh agents for a trial.
pub trait Roster {
    /// Fresh agent for `seat`; the seated model is `variant.model_for(seat)`.
    fn spawn(
        &mut self,
        seat: Seat,
        variant: &ProtocolVariant,
        seed: u64,
    ) -> Result<Box<dyn Agent>, AgentFailure>;

    /// Model name as rendered into prompts.
    fn slug(&self, model: &str) -> String {
        model.into()
    }
}

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

/// Always reports the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Default for FixedClock {
    fn default() -> Self {
        FixedClock(DateTime::<Utc>::UNIX_EPOCH)
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnCounts {
    pub distinguisher: u32,
    pub interlocutor: u32,
    pub specimen_queries: u32,
    pub specimen_replies: u32,
    #[serde(default)]
    pub distinguisher_specimen_queries: u32,
    #[serde(default)]
    pub distinguisher_specimen_replies: u32,
}

/// Prompts actually sent, per seat.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinguisher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinguisher_query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
}

/// Runtime fingerprint. Absent values serialize as null.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvBlock {
    pub runtime_version: Option<String>,
    pub platform: Option<String>,
    pub commit: Option<String>,
    pub branch: Option<String>,
    pub dirty: Option<bool>,
    pub host: Option<String>,
    pub container_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordSource {
    Campaign,
    Arena { mode: String, handle: Option<String> },
}

/// Complete outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub trial_id: String,
    pub config: TrialConfig,
    pub secret_identity: SecretIdentity,
    pub prompts: PromptRecord,
    pub transcript: Vec<Message>,
    pub first_distinguisher_message: Option<String>,
    pub final_distinguisher_message: Option<String>,
    pub parsed: ParsedAnswer,
    /// Distinguisher correct; `None` when unparseable or failed.
    pub success: Option<bool>,
    pub turn_counts: TurnCounts,
    /// Answers ignored because they arrived before a controlled budget ran out.
    #[serde(default)]
    pub early_answers: u32,
    pub route_metadata: BTreeMap<Seat, RouteInfo>,
    pub env: EnvBlock,
    pub failure: Option<TrialFailure>,
    #[serde(default = "one")]
    pub attempt_index: u32,
    pub source: RecordSource,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

fn one() -> u32 {
    1
}

impl TrialRecord {
    /// Verdict parsed and no backend failure.
    pub fn is_analyzable(&self) -> bool {
        self.failure.is_none() && self.parsed.is_answer()
    }

    pub fn messages(&self, channel: Channel) -> impl Iterator<Item = &Message> {
        self.transcript.iter().filter(move |m| m.channel == channel)
    }

    /// Checks the structural invariants of a record; returns the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        for ch in [Channel::Main, Channel::Specimen, Channel::DistinguisherSpecimen] {
            for (expect, m) in self.messages(ch).enumerate() {
                if m.index as usize != expect {
                    return Err("channel indices not consecutive");
                }
            }
        }
        for (i, m) in self.messages(Channel::Main).enumerate() {
            let judge = matches!(m.sender, Sender::Distinguisher | Sender::Human);
            let ok = if i % 2 == 0 { judge } else { m.sender != Sender::Distinguisher };
            if !ok {
                return Err("main channel does not alternate");
            }
        }
        if self.turn_counts.distinguisher > self.config.effective_distinguisher_cap() {
            return Err("distinguisher turns exceed cap");
        }
        if self.turn_counts.specimen_replies > self.config.effective_specimen_cap() {
            return Err("specimen turns exceed cap");
        }
        let expected = if self.failure.is_some() {
            None
        } else {
            success_of(self.parsed, self.secret_identity)
        };
        if self.success != expected {
            return Err("stored success disagrees with verdict and secret");
        }
        Ok(())
    }
}
