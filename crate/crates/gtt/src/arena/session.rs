//! Session lifecycle as a pure transition function.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The person judges an interlocutor that is the target or an imitator.
    HumanDistinguisher,
    /// The person imitates the target while the target judges.
    HumanActor,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::HumanDistinguisher => "human_distinguisher",
            Mode::HumanActor => "human_actor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    /// Created; waiting for the person's first move.
    Open,
    AwaitingHuman,
    AwaitingAgent,
    VerdictSubmitted,
    Revealed,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionEvent {
    HumanMessage,
    AgentReplied,
    Verdict,
    TrialFinished,
    /// Idle past the TTL, or the counterpart failed.
    Expire,
}

pub const STATES: [SessionState; 6] = [
    SessionState::Open,
    SessionState::AwaitingHuman,
    SessionState::AwaitingAgent,
    SessionState::VerdictSubmitted,
    SessionState::Revealed,
    SessionState::Expired,
];

pub const EVENTS: [SessionEvent; 5] = [
    SessionEvent::HumanMessage,
    SessionEvent::AgentReplied,
    SessionEvent::Verdict,
    SessionEvent::TrialFinished,
    SessionEvent::Expire,
];

use SessionEvent as E;
use SessionState as S;

/// Every allowed edge.
pub const EDGES: [(SessionState, SessionEvent, SessionState); 13] = [
    (S::Open, E::HumanMessage, S::AwaitingAgent),
    (S::Open, E::AgentReplied, S::AwaitingHuman),
    (S::Open, E::Verdict, S::VerdictSubmitted),
    (S::Open, E::TrialFinished, S::Revealed),
    (S::AwaitingHuman, E::HumanMessage, S::AwaitingAgent),
    (S::AwaitingHuman, E::Verdict, S::VerdictSubmitted),
    (S::AwaitingAgent, E::AgentReplied, S::AwaitingHuman),
    (S::AwaitingAgent, E::TrialFinished, S::Revealed),
    (S::VerdictSubmitted, E::TrialFinished, S::Revealed),
    (S::Open, E::Expire, S::Expired),
    (S::AwaitingHuman, E::Expire, S::Expired),
    (S::AwaitingAgent, E::Expire, S::Expired),
    (S::VerdictSubmitted, E::Expire, S::Expired),
];

pub fn transition(from: SessionState, event: SessionEvent) -> Option<SessionState> {
    EDGES.iter().find(|(s, e, _)| *s == from && *e == event).map(|(_, _, to)| *to)
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, S::Revealed | S::Expired)
    }

    /// The person may move (message or verdict).
    pub fn accepts_human(self) -> bool {
        matches!(self, S::Open | S::AwaitingHuman)
    }
}
