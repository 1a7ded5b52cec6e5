use serde::{Deserialize, Serialize};

const OPEN: &str = "<answer>";
const CLOSE: &str = "</answer>";

/// Verdict extracted from a distinguisher message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedAnswer {
    /// `<answer>1</answer>`: the interlocutor is the same model / the named model.
    Same,
    /// `<answer>0</answer>`.
    Different,
    /// A tag in the distinguisher's opening message. Ends the trial and is
    /// scored by the contained bit.
    OpeningAnswer { bit: u8 },
    Unparseable,
}

impl ParsedAnswer {
    /// The verdict bit, if any (opening answers included).
    pub fn bit(self) -> Option<bool> {
        match self {
            ParsedAnswer::Same => Some(true),
            ParsedAnswer::Different => Some(false),
            ParsedAnswer::OpeningAnswer { bit } => Some(bit == 1),
            ParsedAnswer::Unparseable => None,
        }
    }

    pub fn is_answer(self) -> bool {
        self.bit().is_some()
    }
}

/// Extracts the bit inside the last well-formed `<answer>b</answer>` tag.
///
/// A tag is well formed when its trimmed body is exactly `0` or `1`; other tags
/// are skipped. Matching is case-sensitive.
pub fn last_answer_bit(message: &str) -> Option<bool> {
    let mut found = None;
    let mut rest = message;
    while let Some(start) = rest.find(OPEN) {
        let body_start = start + OPEN.len();
        let Some(len) = rest[body_start..].find(CLOSE) else { break };
        match rest[body_start..body_start + len].trim() {
            "1" => found = Some(true),
            "0" => found = Some(false),
            _ => {}
        }
        // Resume right after the opening tag so that a malformed tag cannot
        // swallow a well-formed one nested after it.
        rest = &rest[body_start..];
    }
    found
}

/// Parses a distinguisher-authored message. Total.
pub fn parse_answer(message: &str, is_opening: bool) -> ParsedAnswer {
    match (last_answer_bit(message), is_opening) {
        (None, _) => ParsedAnswer::Unparseable,
        (Some(bit), true) => ParsedAnswer::OpeningAnswer { bit: u8::from(bit) },
        (Some(true), false) => ParsedAnswer::Same,
        (Some(false), false) => ParsedAnswer::Different,
    }
}
