use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use chrono::{DateTime, SubsecRound, Utc};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::prompts::{self, PromptError, PromptParams, Template};
use super::{
    Agent, AgentFailure, Channel, ChatTurn, Clock, EnvBlock, Message, ParsedAnswer, PromptRecord,
    RecordSource, Roster, STOP, SCHEMA_VERSION, Seat, SecretIdentity, Sender, TrialConfig,
    TrialFailure, TrialRecord, TurnCounts, parse_answer,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("budget {0} must be at least 1")]
    ZeroBudget(&'static str),
    #[error("controlled query budget requires an actor query phase")]
    ControlledQueryWithoutPhase,
    #[error("controlled turn budget is only defined for self-judged games")]
    ControlledTurnUnsupported,
    #[error("distinguisher query phase requires a fixed distinguisher")]
    QueryingDistinguisherNeedsJudge,
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Distinguisher correctness for a parsed verdict. `None` when unparseable.
pub fn success_of(parsed: ParsedAnswer, secret: SecretIdentity) -> Option<bool> {
    parsed.bit().map(|same| same == (secret == SecretIdentity::Target))
}

/// Checks budgets and variant flags without playing.
pub fn validate_config(config: &TrialConfig) -> Result<(), ConfigError> {
    let v = &config.variant;
    if config.max_distinguisher_turns == 0 {
        return Err(ConfigError::ZeroBudget("max_distinguisher_turns"));
    }
    if config.max_specimen_turns == 0 {
        return Err(ConfigError::ZeroBudget("max_specimen_turns"));
    }
    if config.controlled_turn_budget == Some(0) {
        return Err(ConfigError::ZeroBudget("controlled_turn_budget"));
    }
    if config.controlled_query_budget == Some(0) {
        return Err(ConfigError::ZeroBudget("controlled_query_budget"));
    }
    if config.controlled_query_budget.is_some() && !v.actor_query_phase {
        return Err(ConfigError::ControlledQueryWithoutPhase);
    }
    if config.controlled_turn_budget.is_some()
        && (v.fixed_distinguisher.is_some() || v.distinguisher_query_phase)
    {
        return Err(ConfigError::ControlledTurnUnsupported);
    }
    if v.distinguisher_query_phase && v.fixed_distinguisher.is_none() {
        return Err(ConfigError::QueryingDistinguisherNeedsJudge);
    }
    Ok(())
}

struct Transcript<'c> {
    clock: &'c dyn Clock,
    messages: Vec<Message>,
    next: [u32; 3],
}

impl Transcript<'_> {
    fn push(&mut self, channel: Channel, sender: Sender, content: &str) {
        let slot = match channel {
            Channel::Main => 0,
            Channel::Specimen => 1,
            Channel::DistinguisherSpecimen => 2,
        };
        self.messages.push(Message {
            channel,
            sender,
            index: self.next[slot],
            content: content.to_string(),
            timestamp: now_ms(self.clock),
        });
        self.next[slot] += 1;
    }
}

fn now_ms(clock: &dyn Clock) -> DateTime<Utc> {
    clock.now().trunc_subsecs(3)
}

/// A seat with its agent and the agent's view of the conversation.
struct Participant {
    seat: Seat,
    model: String,
    agent: Box<dyn Agent>,
    history: Vec<ChatTurn>,
}

impl Participant {
    fn respond(&mut self) -> Result<String, TrialFailure> {
        let out = self.agent.respond(&self.history).map_err(|failure| TrialFailure {
            seat: self.seat,
            model: self.model.clone(),
            failure,
        })?;
        self.history.push(ChatTurn::assistant(out.clone()));
        Ok(out)
    }
}

struct Trial<'a> {
    config: &'a TrialConfig,
    roster: &'a mut dyn Roster,
    rng: &'a mut dyn RngCore,
    transcript: Transcript<'a>,
    record: Partial,
}

#[derive(Default)]
struct Partial {
    prompts: PromptRecord,
    counts: TurnCounts,
    early_answers: u32,
    routes: BTreeMap<Seat, super::RouteInfo>,
    first: Option<String>,
    last: Option<String>,
    parsed: Option<ParsedAnswer>,
}

impl<'a> Trial<'a> {
    fn spawn(&mut self, seat: Seat) -> Result<Participant, TrialFailure> {
        let model = self.config.variant.model_for(seat).to_string();
        let seed = self.rng.next_u64();
        let agent = self
            .roster
            .spawn(seat, &self.config.variant, seed)
            .map_err(|failure| TrialFailure { seat, model: model.clone(), failure })?;
        self.record.routes.insert(seat, agent.route());
        Ok(Participant { seat, model, agent, history: Vec::new() })
    }

    fn slug(&self, seat: Seat) -> String {
        self.roster.slug(self.config.variant.model_for(seat))
    }

    /// Specimen stage of a querying distinguisher. Leaves the distinguisher's
    /// history ready for its judge instruction.
    fn distinguisher_specimen_phase(&mut self, judge: &mut Participant) -> Result<(), TrialFailure> {
        let prompt = prompts::render(
            Template::DistinguisherQuery,
            &PromptParams { slug: Some(&self.slug(Seat::Target)), ..Default::default() },
        )
        .map_err(|e| internal(judge, e))?;
        self.record.prompts.distinguisher_query = Some(prompt.clone());
        judge.history.push(ChatTurn::instruction(prompt, None));
        let mut specimen = self.spawn(Seat::DistinguisherSpecimen)?;
        let cap = self.config.max_specimen_turns;
        loop {
            let q = judge.respond()?;
            self.transcript.push(Channel::DistinguisherSpecimen, Sender::Distinguisher, &q);
            self.record.counts.distinguisher_specimen_queries += 1;
            if q.trim() == STOP {
                break;
            }
            specimen.history.push(ChatTurn::user(q));
            let s = specimen.respond()?;
            self.transcript.push(Channel::DistinguisherSpecimen, Sender::Specimen, &s);
            self.record.counts.distinguisher_specimen_replies += 1;
            judge.history.push(ChatTurn::user(s));
            if self.record.counts.distinguisher_specimen_replies >= cap {
                break;
            }
        }
        Ok(())
    }

    /// Actor's specimen stage. The actor's history keeps the whole exchange.
    fn actor_specimen_phase(&mut self, actor: &mut Participant) -> Result<(), TrialFailure> {
        let params = PromptParams {
            slug: Some(&self.slug(Seat::Target)),
            specimen_queries: self.config.controlled_query_budget,
            ..Default::default()
        };
        let controlled = self.config.controlled_query_budget.is_some();
        let prompt = if controlled {
            prompts::render_controlled_query_actor(&params)
        } else {
            prompts::render(Template::GttqActor, &params)
        }
        .map_err(|e| internal(actor, e))?;
        self.record.prompts.actor = Some(prompt.clone());
        actor.history.push(ChatTurn::instruction(prompt, None));
        let mut specimen = self.spawn(Seat::Specimen)?;
        let cap = self.config.effective_specimen_cap();
        loop {
            let q = actor.respond()?;
            self.transcript.push(Channel::Specimen, Sender::Actor, &q);
            self.record.counts.specimen_queries += 1;
            if !controlled && q.trim() == STOP {
                break;
            }
            specimen.history.push(ChatTurn::user(q));
            let s = specimen.respond()?;
            self.transcript.push(Channel::Specimen, Sender::Specimen, &s);
            self.record.counts.specimen_replies += 1;
            actor.history.push(ChatTurn::user(s));
            if self.record.counts.specimen_replies >= cap {
                break;
            }
        }
        Ok(())
    }

    /// Hands the distinguisher's opening to the interlocutor.
    fn open_interlocutor(
        &mut self,
        who: &mut Participant,
        secret: SecretIdentity,
        first: &str,
    ) -> Result<(), TrialFailure> {
        let v = &self.config.variant;
        match secret {
            SecretIdentity::Target => who.history.push(ChatTurn::user(first)),
            SecretIdentity::Imitator if v.actor_query_phase => {
                who.history.push(ChatTurn::user(first))
            }
            SecretIdentity::Imitator => {
                let template = if v.fixed_distinguisher.is_some() {
                    Template::FdActor
                } else {
                    Template::GttActor
                };
                let prompt = prompts::render(
                    template,
                    &PromptParams {
                        slug: Some(&self.slug(Seat::Target)),
                        first_message: Some(first),
                        ..Default::default()
                    },
                )
                .map_err(|e| internal(who, e))?;
                self.record.prompts.actor = Some(prompt.clone());
                who.history.push(ChatTurn::instruction(prompt, Some(first.to_string())));
            }
        }
        Ok(())
    }

    fn judge_prompt(&self) -> Result<String, PromptError> {
        let v = &self.config.variant;
        if v.fixed_distinguisher.is_some() {
            prompts::render(
                Template::FdJudge,
                &PromptParams { slug: Some(&self.slug(Seat::Target)), ..Default::default() },
            )
        } else if let Some(n) = self.config.controlled_turn_budget {
            prompts::render(
                Template::ControlledTurn,
                &PromptParams { distinguisher_turns: Some(n), ..Default::default() },
            )
        } else {
            prompts::render(Template::Distinguisher, &PromptParams::default())
        }
    }

    fn play(&mut self, secret: SecretIdentity) -> Result<(), TrialFailure> {
        let v = self.config.variant.clone();
        let mut judge = self.spawn(Seat::Distinguisher)?;
        if v.distinguisher_query_phase {
            self.distinguisher_specimen_phase(&mut judge)?;
        }
        let mut other = match secret {
            SecretIdentity::Imitator => {
                let mut actor = self.spawn(Seat::Actor)?;
                if v.actor_query_phase {
                    self.actor_specimen_phase(&mut actor)?;
                }
                actor
            }
            SecretIdentity::Target => self.spawn(Seat::Target)?,
        };
        let other_sender = match secret {
            SecretIdentity::Imitator => Sender::Actor,
            SecretIdentity::Target => Sender::Target,
        };

        let prompt = self.judge_prompt().map_err(|e| internal(&judge, e))?;
        self.record.prompts.distinguisher = Some(prompt.clone());
        judge.history.push(ChatTurn::instruction(prompt, None));

        let cap = self.config.effective_distinguisher_cap();
        let controlled = self.config.controlled_turn_budget;
        loop {
            if self.record.counts.distinguisher >= cap {
                self.record.parsed = Some(ParsedAnswer::Unparseable);
                return Ok(());
            }
            let d = judge.respond()?;
            self.transcript.push(Channel::Main, Sender::Distinguisher, &d);
            self.record.counts.distinguisher += 1;
            let turn = self.record.counts.distinguisher;
            let opening = turn == 1;
            if opening {
                self.record.first = Some(d.clone());
            }
            self.record.last = Some(d.clone());
            let parsed = match controlled {
                Some(n) if turn <= n => {
                    if parse_answer(&d, false).is_answer() {
                        self.record.early_answers += 1;
                    }
                    ParsedAnswer::Unparseable
                }
                Some(_) => parse_answer(&d, false),
                None => parse_answer(&d, opening),
            };
            if parsed.is_answer() {
                self.record.parsed = Some(parsed);
                return Ok(());
            }
            if controlled.is_some_and(|n| turn > n) {
                // The verdict round produced no answer.
                self.record.parsed = Some(ParsedAnswer::Unparseable);
                return Ok(());
            }
            if opening {
                self.open_interlocutor(&mut other, secret, &d)?;
            } else {
                other.history.push(ChatTurn::user(d));
            }
            let x = other.respond()?;
            self.transcript.push(Channel::Main, other_sender, &x);
            self.record.counts.interlocutor += 1;
            judge.history.push(ChatTurn::user(x));
        }
    }
}

fn internal(p: &Participant, e: PromptError) -> TrialFailure {
    TrialFailure {
        seat: p.seat,
        model: p.model.clone(),
        failure: AgentFailure::new(super::FailureClass::Domain, e.to_string()),
    }
}

/// Plays one trial to completion.
///
/// `rng` decides the secret (unless preassigned) and the seeds handed to the
/// roster. Backend failures end the trial early and are recorded on the
/// returned record; only invalid configurations are errors.
pub fn run_trial(
    config: &TrialConfig,
    roster: &mut dyn Roster,
    clock: &dyn Clock,
    rng: &mut dyn RngCore,
) -> Result<TrialRecord, ConfigError> {
    validate_config(config)?;
    let started_at = now_ms(clock);
    let secret = match config.secret {
        Some(s) => s,
        None if rng.random_bool(0.5) => SecretIdentity::Target,
        None => SecretIdentity::Imitator,
    };
    let mut trial = Trial {
        config,
        roster,
        rng,
        transcript: Transcript { clock, messages: vec![], next: [0; 3] },
        record: Partial::default(),
    };
    let failure = trial.play(secret).err();
    let Trial { transcript, record: p, .. } = trial;
    let parsed = p.parsed.unwrap_or(ParsedAnswer::Unparseable);
    let success = if failure.is_some() { None } else { success_of(parsed, secret) };
    Ok(TrialRecord {
        schema_version: SCHEMA_VERSION,
        trial_id: config.trial_id.clone(),
        config: config.clone(),
        secret_identity: secret,
        prompts: p.prompts,
        transcript: transcript.messages,
        first_distinguisher_message: p.first,
        final_distinguisher_message: p.last,
        parsed,
        success,
        turn_counts: p.counts,
        early_answers: p.early_answers,
        route_metadata: p.routes,
        env: EnvBlock::default(),
        failure,
        attempt_index: 1,
        source: RecordSource::Campaign,
        started_at,
        finished_at: now_ms(clock),
    })
}

/// [`run_trial`] with a ChaCha8 generator seeded from `config.rng_seed`.
pub fn run_trial_seeded(
    config: &TrialConfig,
    roster: &mut dyn Roster,
    clock: &dyn Clock,
) -> Result<TrialRecord, ConfigError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    run_trial(config, roster, clock, &mut rng)
}
