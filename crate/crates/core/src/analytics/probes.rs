//! Question-unit extraction and rule-based probe classification.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

const DEFAULT_RULES: &str = include_str!("../../assets/probe_rules.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeLabel {
    CapabilityProbe,
    SignatureProbe,
    Other,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    /// Whole lowercase words; a trailing `*` matches any word with that prefix.
    #[serde(default)]
    pub keywords: Vec<String>,
    /// Space-separated word sequences matched contiguously.
    #[serde(default)]
    pub phrases: Vec<String>,
    /// Raw substrings.
    #[serde(default)]
    pub symbols: Vec<String>,
}

impl KeywordSet {
    fn fires(&self, words: &[String], raw: &str) -> bool {
        let word_hit = |k: &String| match k.strip_suffix('*') {
            Some(prefix) => words.iter().any(|w| w.starts_with(prefix)),
            None => words.iter().any(|w| w == k),
        };
        let phrase_hit = |p: &String| {
            let parts: Vec<&str> = p.split_whitespace().collect();
            !parts.is_empty()
                && words.windows(parts.len()).any(|win| win.iter().zip(&parts).all(|(a, b)| a == b))
        };
        self.keywords.iter().any(word_hit)
            || self.phrases.iter().any(phrase_hit)
            || self.symbols.iter().any(|s| raw.contains(s.as_str()))
    }
}

/// Editable rule table. A unit is a signature probe if any signature rule
/// fires, a capability probe if only capability rules fire, other otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRules {
    pub version: u32,
    /// Words skipped before looking for an imperative.
    pub fillers: Vec<String>,
    pub imperatives: Vec<String>,
    pub signature: KeywordSet,
    pub capability: KeywordSet,
}

impl Default for ProbeRules {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES).expect("shipped probe rules parse")
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Splits into sentences. A run of terminators ends a sentence only when
/// followed by whitespace or the end; newlines always end one.
pub fn sentences(message: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in message.lines() {
        let chars: Vec<char> = line.chars().collect();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if is_terminator(chars[i]) {
                let mut j = i;
                while j + 1 < chars.len() && is_terminator(chars[j + 1]) {
                    j += 1;
                }
                if j + 1 == chars.len() || chars[j + 1].is_whitespace() {
                    push_trimmed(&mut out, &chars[start..=j]);
                    start = j + 1;
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        push_trimmed(&mut out, &chars[start..]);
    }
    out
}

fn strip_verdicts(message: &str) -> String {
    let mut out = String::new();
    let mut rest = message;
    while let Some(open) = rest.find("<answer>") {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        match after.find("</answer>") {
            Some(close) => rest = &after[close + "</answer>".len()..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

impl ProbeRules {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn opens_with_imperative(&self, sentence: &str) -> bool {
        let ws = words(sentence);
        let first = ws.iter().find(|w| !self.fillers.contains(w));
        first.is_some_and(|w| self.imperatives.contains(w))
    }

    /// Interrogative sentences and sentences opening with a probe imperative.
    /// Verdict tags are removed first.
    pub fn extract_question_units(&self, message: &str) -> Vec<String> {
        sentences(&strip_verdicts(message))
            .into_iter()
            .filter(|s| s.ends_with('?') || self.opens_with_imperative(s))
            .collect()
    }

    pub fn classify(&self, unit: &str) -> ProbeLabel {
        let ws = words(unit);
        let raw = unit.to_lowercase();
        if self.signature.fires(&ws, &raw) {
            ProbeLabel::SignatureProbe
        } else if self.capability.fires(&ws, &raw) {
            ProbeLabel::CapabilityProbe
        } else {
            ProbeLabel::Other
        }
    }
}

pub fn extract_question_units(message: &str) -> Vec<String> {
    ProbeRules::default().extract_question_units(message)
}

pub fn classify_question_unit(unit: &str) -> ProbeLabel {
    ProbeRules::default().classify(unit)
}

/// A distinguisher message in a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMessage {
    pub text: String,
    /// The distinguisher's first main-channel message of its trial.
    pub first_turn: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rules_version: u32,
    pub messages: u64,
    pub units: u64,
    pub capability: u64,
    pub signature: u64,
    pub other: u64,
    pub first_turn_units: u64,
    pub first_turn_signature: u64,
    /// Fractions rounded to 3 decimals; zero when there are no units.
    pub capability_fraction: f64,
    pub signature_fraction: f64,
    pub first_turn_signature_fraction: f64,
}

fn frac3(n: u64, d: u64) -> f64 {
    if d == 0 { 0.0 } else { super::scores::round3(n as f64 / d as f64) }
}

impl ProbeRules {
    pub fn report<'a>(&self, corpus: impl IntoIterator<Item = &'a ProbeMessage>) -> ProbeReport {
        let mut r = ProbeReport { rules_version: self.version, ..Default::default() };
        for m in corpus {
            r.messages += 1;
            for u in self.extract_question_units(&m.text) {
                r.units += 1;
                let label = self.classify(&u);
                match label {
                    ProbeLabel::CapabilityProbe => r.capability += 1,
                    ProbeLabel::SignatureProbe => r.signature += 1,
                    ProbeLabel::Other => r.other += 1,
                }
                if m.first_turn {
                    r.first_turn_units += 1;
                    if label == ProbeLabel::SignatureProbe {
                        r.first_turn_signature += 1;
                    }
                }
            }
        }
        r.capability_fraction = frac3(r.capability, r.units);
        r.signature_fraction = frac3(r.signature, r.units);
        r.first_turn_signature_fraction = frac3(r.first_turn_signature, r.first_turn_units);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn segmentation() {
        assert_eq!(extract_question_units("What is 2+2? Also, who made you?").len(), 2);
        assert!(extract_question_units("").is_empty());
        assert_eq!(sentences("Pi is 3.14. Right?"), vec!["Pi is 3.14.", "Right?"]);
        assert_eq!(extract_question_units("Nice. Please write a haiku.\nThanks!"), vec!["Please write a haiku."]);
    }

    #[test]
    fn labels() {
        assert_eq!(classify_question_unit("Who is your creator?"), ProbeLabel::SignatureProbe);
        assert_eq!(classify_question_unit("Prove that √2 is irrational."), ProbeLabel::CapabilityProbe);
        assert_eq!(classify_question_unit("Nice weather today."), ProbeLabel::Other);
        // Ties go to signature.
        assert_eq!(classify_question_unit("Are you able to solve x^2 = 4?"), ProbeLabel::SignatureProbe);
    }

    #[test]
    fn report_fractions() {
        let corpus = vec![
            ProbeMessage { text: "Who made you? Solve 3+4.".into(), first_turn: true },
            ProbeMessage { text: "Hi there. How is it going?".into(), first_turn: false },
        ];
        let r = ProbeRules::default().report(&corpus);
        assert_eq!((r.units, r.capability, r.signature, r.other), (3, 1, 1, 1));
        assert_eq!(r.capability_fraction, 0.333);
        assert_eq!(r.first_turn_signature_fraction, 0.5);
    }
}
