//! Prompt templates and placeholder substitution.
//!
//! Templates are stored verbatim as text assets. Placeholders have the form
//! `{name with spaces}`; everything outside them is emitted byte for byte.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

/// Bumped whenever an asset changes.
pub const TEMPLATE_VERSION: u32 = 1;

pub const SLUG: &str = "target model slug";
pub const FIRST_MESSAGE: &str = "first distinguisher message";
pub const SPECIMEN_QUERIES: &str = "number of specimen queries";
pub const DISTINGUISHER_TURNS: &str = "number of distinguisher turns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    GttActor,
    Distinguisher,
    GttqActor,
    ControlledSpecimenQuery,
    ControlledTurn,
    FdActor,
    FdJudge,
    /// Experimental: specimen stage for a querying distinguisher.
    DistinguisherQuery,
}

impl Template {
    pub const ALL: [Template; 8] = [
        Template::GttActor,
        Template::Distinguisher,
        Template::GttqActor,
        Template::ControlledSpecimenQuery,
        Template::ControlledTurn,
        Template::FdActor,
        Template::FdJudge,
        Template::DistinguisherQuery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::GttActor => "gtt_actor",
            Template::Distinguisher => "distinguisher",
            Template::GttqActor => "gttq_actor",
            Template::ControlledSpecimenQuery => "controlled_specimen_query",
            Template::ControlledTurn => "controlled_turn",
            Template::FdActor => "fd_actor",
            Template::FdJudge => "fd_judge",
            Template::DistinguisherQuery => "distinguisher_query",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Template::GttActor => include_str!("../../assets/prompts/gtt_actor.txt"),
            Template::Distinguisher => include_str!("../../assets/prompts/distinguisher.txt"),
            Template::GttqActor => include_str!("../../assets/prompts/gttq_actor.txt"),
            Template::ControlledSpecimenQuery => {
                include_str!("../../assets/prompts/controlled_specimen_query.txt")
            }
            Template::ControlledTurn => include_str!("../../assets/prompts/controlled_turn.txt"),
            Template::FdActor => include_str!("../../assets/prompts/fd_actor.txt"),
            Template::FdJudge => include_str!("../../assets/prompts/fd_judge.txt"),
            Template::DistinguisherQuery => {
                include_str!("../../assets/prompts/distinguisher_query.txt")
            }
        }
    }

    pub fn is_experimental(self) -> bool {
        matches!(self, Template::DistinguisherQuery)
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for seg in segments(self.text()) {
            if let Segment::Hole(name) = seg {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

/// Substitution values. Unused fields are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptParams<'a> {
    pub slug: Option<&'a str>,
    pub first_message: Option<&'a str>,
    pub specimen_queries: Option<u32>,
    pub distinguisher_turns: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("missing value for placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("template has unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
}

enum Segment<'a> {
    Text(&'a str),
    Hole(&'a str),
}

fn segments(template: &str) -> impl Iterator<Item = Segment<'_>> {
    let mut rest = template;
    core::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        if let Some(open) = rest.find('{') {
            if open > 0 {
                let (text, tail) = rest.split_at(open);
                rest = tail;
                return Some(Segment::Text(text));
            }
            if let Some(close) = rest.find('}') {
                let name = &rest[1..close];
                rest = &rest[close + 1..];
                return Some(Segment::Hole(name));
            }
        }
        let text = rest;
        rest = "";
        Some(Segment::Text(text))
    })
}

fn lookup(name: &str, params: &PromptParams<'_>) -> Result<String, PromptError> {
    let missing = || PromptError::MissingPlaceholder(name.to_string());
    match name {
        SLUG => params.slug.map(str::to_string).ok_or_else(missing),
        FIRST_MESSAGE => params.first_message.map(str::to_string).ok_or_else(missing),
        SPECIMEN_QUERIES => params.specimen_queries.map(|n| n.to_string()).ok_or_else(missing),
        DISTINGUISHER_TURNS => {
            params.distinguisher_turns.map(|n| n.to_string()).ok_or_else(missing)
        }
        other => Err(PromptError::UnknownPlaceholder(other.to_string())),
    }
}

/// Renders raw template text.
pub fn render_text(template: &str, params: &PromptParams<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 64);
    for seg in segments(template) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Hole(name) => {
                let v = lookup(name, params)?;
                let _ = out.write_str(&v);
            }
        }
    }
    Ok(out)
}

pub fn render(template: Template, params: &PromptParams<'_>) -> Result<String, PromptError> {
    render_text(template.text(), params)
}

/// Controlled specimen-query actor prompt: the GTTQ imitation preamble (up to
/// its specimen paragraph) followed by the controlled specimen paragraph.
pub fn render_controlled_query_actor(params: &PromptParams<'_>) -> Result<String, PromptError> {
    let gttq = Template::GttqActor.text();
    let cut = gttq.find(" However, ").unwrap_or(gttq.len());
    let mut out = render_text(&gttq[..cut], params)?;
    out.push(' ');
    out.push_str(&render(Template::ControlledSpecimenQuery, params)?);
    Ok(out)
}
