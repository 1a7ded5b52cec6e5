//! Agent whose turns come from a person through a channel.

use std::sync::mpsc::{Receiver, Sender, channel};

use gtt_core::protocol::{Agent, AgentFailure, ChatTurn, FailureClass, RouteInfo};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HumanInput {
    Message(String),
    /// Rendered as an answer tag.
    Verdict(bool),
}

/// Called with the seat's full view each time the person is asked to move.
pub type Notify = Box<dyn FnMut(&[ChatTurn]) + Send>;

pub struct HumanRelay {
    inbox: Receiver<HumanInput>,
    notify: Notify,
    handle: Option<String>,
}

impl HumanRelay {
    /// Relay plus the sender feeding it. Dropping the sender makes the next
    /// turn fail as unavailable.
    pub fn new(notify: Notify, handle: Option<String>) -> (Self, Sender<HumanInput>) {
        let (tx, rx) = channel();
        (HumanRelay { inbox: rx, notify, handle }, tx)
    }
}

pub fn render_verdict(bit: bool) -> String {
    format!("<answer>{}</answer>", u8::from(bit))
}

impl Agent for HumanRelay {
    fn respond(&mut self, history: &[ChatTurn]) -> Result<String, AgentFailure> {
        (self.notify)(history);
        match self.inbox.recv() {
            Ok(HumanInput::Message(m)) => Ok(m),
            Ok(HumanInput::Verdict(b)) => Ok(render_verdict(b)),
            Err(_) => Err(AgentFailure::new(FailureClass::Unavailable, "human left the session")),
        }
    }

    fn route(&self) -> RouteInfo {
        RouteInfo { backend: "human_relay".into(), display_name: self.handle.clone(), ..Default::default() }
    }
}
