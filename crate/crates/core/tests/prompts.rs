use gtt_core::protocol::prompts::{
    PromptError, PromptParams, Template, render, render_controlled_query_actor, render_text,
};

const PARAMS: PromptParams<'static> = PromptParams {
    slug: Some("acme/model-x"),
    first_message: Some("Hello there, who am I talking to?"),
    specimen_queries: Some(3),
    distinguisher_turns: Some(5),
};

fn golden(t: Template) -> &'static str {
    match t {
        Template::GttActor => include_str!("golden/gtt_actor.txt"),
        Template::Distinguisher => include_str!("golden/distinguisher.txt"),
        Template::GttqActor => include_str!("golden/gttq_actor.txt"),
        Template::ControlledSpecimenQuery => include_str!("golden/controlled_specimen_query.txt"),
        Template::ControlledTurn => include_str!("golden/controlled_turn.txt"),
        Template::FdActor => include_str!("golden/fd_actor.txt"),
        Template::FdJudge => include_str!("golden/fd_judge.txt"),
        Template::DistinguisherQuery => unreachable!(),
    }
}

#[test]
fn seven_templates_match_goldens_byte_for_byte() {
    let stable: Vec<Template> = Template::ALL.into_iter().filter(|t| !t.is_experimental()).collect();
    assert_eq!(stable.len(), 7);
    for t in stable {
        let got = render(t, &PARAMS).unwrap();
        assert_eq!(got.as_bytes(), golden(t).as_bytes(), "template {}", t.name());
    }
}

#[test]
fn text_outside_placeholders_is_untouched() {
    for t in Template::ALL {
        let rendered = render(t, &PARAMS).unwrap();
        let mut rest = rendered.as_str();
        for piece in t.text().split(['{', '}']).step_by(2) {
            let at = rest.find(piece).unwrap_or_else(|| panic!("{}: lost {piece:?}", t.name()));
            rest = &rest[at + piece.len()..];
        }
    }
}

#[test]
fn placeholder_values_appear_verbatim() {
    let first = "Odd {braces} and \"quotes\" survive";
    let p = PromptParams { first_message: Some(first), ..PARAMS };
    assert!(render(Template::GttActor, &p).unwrap().contains(first));
    assert!(render(Template::ControlledSpecimenQuery, &PARAMS).unwrap().contains("exactly 3 queries"));
}

#[test]
fn gtt_actor_ends_around_first_message() {
    let p = PromptParams { slug: Some("m"), first_message: Some("hi"), ..Default::default() };
    let s = render(Template::GttActor, &p).unwrap();
    let t = Template::GttActor.text();
    let suffix = &t[t.rfind("{first distinguisher message}").unwrap() + "{first distinguisher message}".len()..];
    assert!(s.ends_with(&format!("hi{suffix}")));
}

#[test]
fn missing_placeholder_is_named() {
    let err = render(Template::GttActor, &PromptParams { slug: Some("m"), ..Default::default() }).unwrap_err();
    assert_eq!(err, PromptError::MissingPlaceholder("first distinguisher message".into()));
    assert!(matches!(render_text("{bogus}", &PARAMS), Err(PromptError::UnknownPlaceholder(_))));
}

#[test]
fn controlled_query_actor_is_gttq_preamble_plus_paragraph() {
    let s = render_controlled_query_actor(&PARAMS).unwrap();
    let para = render(Template::ControlledSpecimenQuery, &PARAMS).unwrap();
    assert!(s.ends_with(&para));
    assert!(s.starts_with("You will be interacting"));
    assert!(s.contains("acme/model-x"));
}
