use gtt_core::analytics::{ProbeLabel, ProbeMessage, ProbeRules};
use serde::Deserialize;

#[derive(Deserialize)]
struct Labeled {
    text: String,
    first_turn: bool,
    units: Vec<(String, ProbeLabel)>,
}

fn corpus() -> Vec<Labeled> {
    include_str!("fixtures/probe_corpus.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn fixture_matches_exactly() {
    let rules = ProbeRules::default();
    let corpus = corpus();
    assert_eq!(corpus.len(), 50);
    let mut mismatches = Vec::new();
    for m in &corpus {
        let got: Vec<(String, ProbeLabel)> =
            rules.extract_question_units(&m.text).into_iter().map(|u| { let l = rules.classify(&u); (u, l) }).collect();
        if got != m.units {
            mismatches.push(format!("{:?}\n  want {:?}\n  got  {:?}", m.text, m.units, got));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn deterministic_report() {
    let msgs: Vec<ProbeMessage> =
        corpus().into_iter().map(|m| ProbeMessage { text: m.text, first_turn: m.first_turn }).collect();
    let a = ProbeRules::default().report(&msgs);
    let b = ProbeRules::default().report(&msgs);
    assert_eq!(a, b);
    let units: u64 = corpus().iter().map(|m| m.units.len() as u64).sum();
    assert_eq!(a.units, units);
    assert_eq!(a.capability + a.signature + a.other, a.units);
}

#[test]
fn rules_are_editable() {
    let mut rules = ProbeRules::default();
    assert_eq!(rules.classify("Tell me a joke."), ProbeLabel::Other);
    rules.capability.keywords.push("joke".into());
    assert_eq!(rules.classify("Tell me a joke."), ProbeLabel::CapabilityProbe);
    let json = serde_json::to_string(&rules).unwrap();
    assert_eq!(ProbeRules::from_json(&json).unwrap(), rules);
}
