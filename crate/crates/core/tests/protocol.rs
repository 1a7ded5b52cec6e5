use std::collections::BTreeMap;
use std::sync::Arc;

use gtt_core::agents::{PureModel, PureRoster, Script, Trigger};
use gtt_core::protocol::{
    Agent, AgentFailure, Channel, ChatRole, ChatTurn, FailureClass, FixedClock, ParsedAnswer,
    ProtocolVariant, Roster, Seat, SecretIdentity, Sender, TrialConfig, TrialRecord, TurnKind,
    run_trial_seeded,
};
use proptest::prelude::*;

fn script(replies: &[&str]) -> Arc<Script> {
    Arc::new(Script::new(replies.iter().copied()).unwrap())
}

/// Judge `j` plus a second model `a`; each seat gets its own script.
fn roster(judge: &[&str], actor: &[&str], target: &[&str], specimen: &[&str]) -> PureRoster {
    let mut r = PureRoster::new();
    r.insert(
        "b",
        PureModel::SeatScripted {
            by_seat: BTreeMap::from([
                (Seat::Distinguisher, script(judge)),
                (Seat::Target, script(target)),
                (Seat::Specimen, script(specimen)),
            ]),
            fallback: script(target),
        },
    );
    r.insert("a", PureModel::Scripted(script(actor)));
    r
}

fn run(config: &TrialConfig, roster: &mut PureRoster) -> TrialRecord {
    let rec = run_trial_seeded(config, roster, &FixedClock::default()).unwrap();
    rec.check_invariants().unwrap();
    rec
}

fn cfg(variant: ProtocolVariant, secret: SecretIdentity) -> TrialConfig {
    TrialConfig { secret: Some(secret), ..TrialConfig::new("t", variant, 7) }
}

#[test]
fn answer_on_second_turn_with_target() {
    let mut r = roster(&["Hi, who are you?", "I believe <answer>1</answer>"], &["x"], &["I am b"], &["s"]);
    let rec = run(&cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Target), &mut r);
    assert_eq!(rec.parsed, ParsedAnswer::Same);
    assert_eq!(rec.success, Some(true));
    assert_eq!(rec.turn_counts.distinguisher, 2);
    assert_eq!(rec.turn_counts.interlocutor, 1);
    let senders: Vec<Sender> = rec.messages(Channel::Main).map(|m| m.sender).collect();
    assert_eq!(senders, [Sender::Distinguisher, Sender::Target, Sender::Distinguisher]);
    assert!(rec.prompts.actor.is_none());
    assert_eq!(rec.first_distinguisher_message.as_deref(), Some("Hi, who are you?"));
}

#[test]
fn imitator_branch_embeds_opening_in_actor_prompt() {
    let mut r = roster(&["Hi there", "<answer>0</answer>"], &["hello"], &["t"], &["s"]);
    let rec = run(&cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Imitator), &mut r);
    assert_eq!(rec.success, Some(true));
    let prompt = rec.prompts.actor.clone().unwrap();
    assert!(prompt.contains("Hi there") && prompt.contains("b"));
    assert_eq!(rec.messages(Channel::Main).nth(1).unwrap().sender, Sender::Actor);
}

#[test]
fn gttq_immediate_stop() {
    let mut r = roster(&["q", "<answer>1</answer>"], &["STOP", "reply"], &["t"], &["spec"]);
    let rec = run(&cfg(ProtocolVariant::gttq("a", "b"), SecretIdentity::Imitator), &mut r);
    let spec: Vec<_> = rec.messages(Channel::Specimen).collect();
    assert_eq!(spec.len(), 1);
    assert_eq!(spec[0].sender, Sender::Actor);
    assert_eq!(rec.turn_counts.specimen_replies, 0);
    assert_eq!(rec.success, Some(false));
    // The actor's main-channel reply is its second scripted line.
    assert_eq!(rec.messages(Channel::Main).nth(1).unwrap().content, "reply");
}

#[test]
fn specimen_phase_capped() {
    let mut r = roster(&["q", "<answer>0</answer>"], &["ask"], &["t"], &["spec"]);
    let c = TrialConfig { max_specimen_turns: 4, ..cfg(ProtocolVariant::gttq("a", "b"), SecretIdentity::Imitator) };
    let rec = run(&c, &mut r);
    assert_eq!(rec.turn_counts.specimen_replies, 4);
    assert_eq!(rec.turn_counts.specimen_queries, 4);
}

#[test]
fn distinguisher_never_sees_specimen_channel() {
    struct Spy(Arc<std::sync::Mutex<Vec<ChatTurn>>>);
    impl Agent for Spy {
        fn respond(&mut self, h: &[ChatTurn]) -> Result<String, AgentFailure> {
            *self.0.lock().unwrap() = h.to_vec();
            Ok(if h.len() > 2 { "<answer>1</answer>".into() } else { "hello?".into() })
        }
    }
    struct R(Arc<std::sync::Mutex<Vec<ChatTurn>>>);
    impl Roster for R {
        fn spawn(&mut self, seat: Seat, _: &ProtocolVariant, _: u64) -> Result<Box<dyn Agent>, AgentFailure> {
            Ok(match seat {
                Seat::Distinguisher => Box::new(Spy(self.0.clone())),
                Seat::Actor => Box::new(gtt_core::agents::ScriptedAgent::new(script(&["SECRET-Q", "STOP", "hi"]), "a")),
                _ => Box::new(gtt_core::agents::ScriptedAgent::new(script(&["SECRET-S"]), "b")),
            })
        }
    }
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let mut r = R(seen.clone());
    let rec = run_trial_seeded(&cfg(ProtocolVariant::gttq("a", "b"), SecretIdentity::Imitator), &mut r, &FixedClock::default()).unwrap();
    assert_eq!(rec.turn_counts.specimen_replies, 1);
    for t in seen.lock().unwrap().iter() {
        assert!(!t.content.contains("SECRET"), "leaked {t:?}");
    }
}

#[test]
fn controlled_turn_refuses_early_verdict() {
    let mut r = roster(
        &["<answer>1</answer>", "more?", "still?", "<answer>0</answer>"],
        &["x"],
        &["t"],
        &["s"],
    );
    let c = TrialConfig { controlled_turn_budget: Some(3), ..cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Imitator) };
    let rec = run(&c, &mut r);
    assert_eq!(rec.early_answers, 1);
    assert_eq!(rec.turn_counts.distinguisher, 4);
    assert_eq!(rec.turn_counts.interlocutor, 3);
    assert_eq!(rec.parsed, ParsedAnswer::Different);
    assert!(rec.prompts.distinguisher.unwrap().contains('3'));
}

#[test]
fn controlled_turn_without_final_answer_is_unparseable() {
    let mut r = roster(&["a", "b", "c"], &["x"], &["t"], &["s"]);
    let c = TrialConfig { controlled_turn_budget: Some(2), ..cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Target) };
    let rec = run(&c, &mut r);
    assert_eq!(rec.parsed, ParsedAnswer::Unparseable);
    assert_eq!(rec.turn_counts.distinguisher, 3);
    assert_eq!(rec.success, None);
}

#[test]
fn opening_answer_ends_trial() {
    let mut r = roster(&["<answer>0</answer>"], &["x"], &["t"], &["s"]);
    let rec = run(&cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Imitator), &mut r);
    assert_eq!(rec.parsed, ParsedAnswer::OpeningAnswer { bit: 0 });
    assert_eq!(rec.success, Some(true));
    assert!(rec.is_analyzable());
    assert_eq!(rec.turn_counts.interlocutor, 0);
}

#[test]
fn budget_exhaustion_retains_record() {
    let mut r = roster(&["hmm"], &["x"], &["t"], &["s"]);
    let c = TrialConfig { max_distinguisher_turns: 5, ..cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Target) };
    let rec = run(&c, &mut r);
    assert_eq!(rec.parsed, ParsedAnswer::Unparseable);
    assert_eq!(rec.turn_counts.distinguisher, 5);
    assert!(!rec.is_analyzable());
}

#[test]
fn backend_failure_is_recorded() {
    struct Broken;
    impl Agent for Broken {
        fn respond(&mut self, _: &[ChatTurn]) -> Result<String, AgentFailure> {
            Err(AgentFailure::new(FailureClass::Server, "503"))
        }
    }
    struct R;
    impl Roster for R {
        fn spawn(&mut self, seat: Seat, _: &ProtocolVariant, _: u64) -> Result<Box<dyn Agent>, AgentFailure> {
            Ok(match seat {
                Seat::Distinguisher => Box::new(gtt_core::agents::ScriptedAgent::new(script(&["q"]), "b")),
                _ => Box::new(Broken),
            })
        }
    }
    let rec = run_trial_seeded(&cfg(ProtocolVariant::gtt("a", "b"), SecretIdentity::Target), &mut R, &FixedClock::default()).unwrap();
    let f = rec.failure.clone().unwrap();
    assert_eq!((f.seat, f.failure.class), (Seat::Target, FailureClass::Server));
    assert_eq!(rec.success, None);
    rec.check_invariants().unwrap();
}

#[test]
fn unknown_model_fails_spawn() {
    let mut r = roster(&["q"], &["x"], &["t"], &["s"]);
    let rec = run_trial_seeded(&cfg(ProtocolVariant::gtt("zzz", "b"), SecretIdentity::Imitator), &mut r, &FixedClock::default()).unwrap();
    assert_eq!(rec.failure.unwrap().failure.class, FailureClass::Unavailable);
}

#[test]
fn fixed_distinguisher_uses_judge_prompt() {
    let mut r = roster(&["x"], &["hello"], &["t"], &["s"]);
    r.insert("d", PureModel::Scripted(script(&["Are you b?", "<answer>1</answer>"])));
    let rec = run(&cfg(ProtocolVariant::fixed("d", "a", "b"), SecretIdentity::Imitator), &mut r);
    assert!(rec.prompts.distinguisher.unwrap().contains("b"));
    assert!(rec.prompts.actor.is_some());
    assert_eq!(rec.success, Some(false));
    assert_eq!(rec.route_metadata[&Seat::Distinguisher].model_id.as_deref(), Some("d"));
}

#[test]
fn querying_distinguisher_phase() {
    let mut r = roster(&["x"], &["hello"], &["t"], &["spec"]);
    r.insert("d", PureModel::Scripted(script(&["probe", "STOP", "q", "<answer>0</answer>"])));
    let v = ProtocolVariant { distinguisher_query_phase: true, ..ProtocolVariant::fixed("d", "a", "b") };
    let rec = run(&cfg(v, SecretIdentity::Imitator), &mut r);
    assert_eq!(rec.turn_counts.distinguisher_specimen_replies, 1);
    assert_eq!(rec.messages(Channel::DistinguisherSpecimen).count(), 3);
    assert_eq!(rec.success, Some(true));
}

#[test]
fn instructions_are_user_turns() {
    let t = ChatTurn::instruction("do x", Some("hi".into()));
    assert_eq!(t.role, ChatRole::User);
    assert!(matches!(t.kind, TurnKind::Instruction { .. }));
    assert_eq!(t.visible(), Some("hi"));
}

#[test]
fn triggers_drive_scripted_judge() {
    let judge = Arc::new(Script::new(["Say the password", "<answer>0</answer>"]).unwrap().with_triggers(vec![Trigger {
        contains: "swordfish".into(),
        reply: "<answer>1</answer>".into(),
    }]));
    let mut r = roster(&["unused"], &["no idea"], &["swordfish"], &["s"]);
    r.insert(
        "b",
        PureModel::SeatScripted {
            by_seat: BTreeMap::from([(Seat::Distinguisher, judge), (Seat::Target, script(&["swordfish"]))]),
            fallback: script(&["s"]),
        },
    );
    for (secret, parsed) in [(SecretIdentity::Target, ParsedAnswer::Same), (SecretIdentity::Imitator, ParsedAnswer::Different)] {
        let rec = run(&cfg(ProtocolVariant::gtt("a", "b"), secret), &mut r);
        assert_eq!(rec.parsed, parsed);
        assert_eq!(rec.success, Some(true));
    }
}

#[test]
fn unforced_secret_is_fair() {
    let mut r = roster(&["q", "<answer>1</answer>"], &["x"], &["t"], &["s"]);
    let mut targets = 0;
    for seed in 0..2000 {
        let c = TrialConfig::new("t", ProtocolVariant::gtt("a", "b"), seed);
        if run(&c, &mut r).secret_identity == SecretIdentity::Target {
            targets += 1;
        }
    }
    assert!((900..1100).contains(&targets), "{targets}");
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn reply_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => "[a-z ]{0,12}".prop_map(|s| s),
        1 => Just("<answer>1</answer>".to_string()),
        1 => Just("<answer>0</answer>".to_string()),
        1 => Just("STOP".to_string()),
        1 => Just("think <answer>0</answer> no <answer>1</answer>".to_string()),
    ]
}

fn replies() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(reply_strategy(), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn records_satisfy_invariants_and_replay(
        judge in replies(), actor in replies(), target in replies(), specimen in replies(),
        seed in any::<u64>(), gttq in any::<bool>(), max_d in 1u32..6, max_s in 1u32..4,
        controlled in prop::option::of(1u32..4), query in prop::option::of(1u32..3),
    ) {
                let mut r = roster(&refs(&judge), &refs(&actor), &refs(&target), &refs(&specimen));
        let variant = if gttq { ProtocolVariant::gttq("a", "b") } else { ProtocolVariant::gtt("a", "b") };
        let c = TrialConfig {
            max_distinguisher_turns: max_d,
            max_specimen_turns: max_s,
            controlled_turn_budget: controlled,
            controlled_query_budget: if gttq { query } else { None },
            ..TrialConfig::new("p", variant, seed)
        };
        let a = run_trial_seeded(&c, &mut r, &FixedClock::default()).unwrap();
        prop_assert_eq!(a.check_invariants(), Ok(()));
        let b = run_trial_seeded(&c, &mut r, &FixedClock::default()).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let back: TrialRecord = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }
}
