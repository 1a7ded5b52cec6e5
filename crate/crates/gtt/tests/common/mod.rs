#![allow(dead_code)]

use std::sync::Arc;
use std::sync::atomic::{AtomicUsize, Ordering};

use gtt::backends::{AgentFactory, Registry, RegistryBuilder};
use gtt::core::protocol::{Agent, AgentFailure, ChatTurn, EnvBlock, FailureClass, Seat};
use gtt::runner::CampaignPlan;

/// Replies in order, repeating the last.
pub struct Canned {
    replies: Vec<String>,
    n: usize,
}

impl Canned {
    pub fn new(replies: Vec<String>) -> Self {
        Canned { replies, n: 0 }
    }
}

impl Agent for Canned {
    fn respond(&mut self, _: &[ChatTurn]) -> Result<String, AgentFailure> {
        let r = self.replies[self.n.min(self.replies.len() - 1)].clone();
        self.n += 1;
        Ok(r)
    }
}

/// Judges ask one question, then answer with a seed-dependent bit.
pub fn judge_factory(name: &str, spawns: Arc<AtomicUsize>) -> AgentFactory {
    let name = name.to_string();
    Arc::new(move |seat, _variant, seed| {
        spawns.fetch_add(1, Ordering::SeqCst);
        let replies = match seat {
            Seat::Distinguisher => vec!["What are you?".to_string(), format!("<answer>{}</answer>", seed & 1)],
            _ => vec![format!("I am {name}.")],
        };
        Ok(Box::new(Canned::new(replies)) as Box<dyn Agent>)
    })
}

pub fn registry(models: &[String], spawns: &Arc<AtomicUsize>) -> RegistryBuilder {
    models.iter().fold(Registry::builder(), |b, m| b.custom(m, judge_factory(m, spawns.clone())))
}

pub fn failing(class: FailureClass) -> AgentFactory {
    Arc::new(move |_, _, _| Err(AgentFailure::new(class, "scripted outage")))
}

pub fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("model-{i}")).collect()
}

pub fn plan(models: &[String], trials: u32) -> CampaignPlan {
    let text = format!("models = {models:?}\ntrials_per_ordered_pair = {trials}\nseed = 11\n");
    CampaignPlan::parse(&text, "test").unwrap()
}

pub fn env() -> EnvBlock {
    EnvBlock { runtime_version: Some("test".into()), ..Default::default() }
}
