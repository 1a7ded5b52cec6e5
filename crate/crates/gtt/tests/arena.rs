mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::failing;
use gtt::arena::session::{EDGES, EVENTS, STATES};
use gtt::arena::{Arena, ArenaConfig, ArenaStore, Leaderboard, transition};
use gtt::backends::Registry;
use gtt::core::protocol::{Agent, AgentFailure, FailureClass, RecordSource, SecretIdentity};
use http_body_util::BodyExt;
use serde_json::{Value, json};
use tower::ServiceExt;

const REPLIES: [&str; 3] = ["I'm an assistant.", "I like puzzles.", "Nothing more to add."];

fn registry() -> Registry {
    Registry::builder()
        .scripted("alpha", &REPLIES)
        .scripted("beta", &REPLIES)
        .scripted("judge", &["Who are you?", "Prove it.", "<answer>0</answer>"])
        .custom("broken", failing(FailureClass::Server))
        .custom("flaky", Arc::new(|_, _, _| Ok(Box::new(Mute) as Box<dyn Agent>)))
        .human("someone")
        .build()
}

fn arena(store: &std::path::Path, seed: u64) -> Arena {
    let mut cfg = ArenaConfig::new(registry(), store);
    cfg.max_turns = 3;
    cfg.secret_seed = Some(seed);
    Arena::new(cfg).unwrap()
}

async fn call(a: &Arena, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = a.router().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

/// Strips fields that differ between sessions for reasons unrelated to the
/// secret.
fn normalized(mut v: Value) -> Value {
    fn walk(v: &mut Value) {
        match v {
            Value::Object(m) => {
                m.remove("session_id");
                m.remove("expires_at");
                m.values_mut().for_each(walk);
            }
            Value::Array(a) => a.iter_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}

fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.push(k.clone());
                keys(x, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| keys(x, out)),
        _ => {}
    }
}

fn assert_no_leak(v: &Value) {
    let mut ks = Vec::new();
    keys(v, &mut ks);
    for bad in ["secret", "secret_identity", "actor", "route", "route_metadata", "reveal", "success"] {
        assert!(!ks.iter().any(|k| k == bad), "pre-reveal payload has {bad:?}: {v}");
    }
    let text = v.to_string();
    for bad in ["imitator", "beta", "rng_seed"] {
        assert!(!text.contains(bad), "pre-reveal payload mentions {bad:?}: {text}");
    }
}

/// Spawns fine, then fails on its first reply.
struct Mute;

impl Agent for Mute {
    fn respond(&mut self, _: &[gtt::core::protocol::ChatTurn]) -> Result<String, AgentFailure> {
        Err(AgentFailure::new(FailureClass::Server, "upstream 503 for key sk-abc"))
    }
}

struct Played {
    pre_reveal: Vec<Value>,
    revealed: Value,
}

/// create, two messages, verdict "same model".
async fn play(a: &Arena) -> Played {
    let mut pre = Vec::new();
    let (s, v) = call(a, "POST", "/sessions", Some(json!({"mode": "human_distinguisher", "target": "alpha", "actor": "beta", "handle": "ada"}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["session_id"].as_str().unwrap().to_string();
    assert_eq!(v["state"], "open");
    assert_eq!(v["turns_remaining"], 3);
    assert!(v["instructions"].as_str().unwrap().contains("alpha"));
    pre.push(v);
    for (i, q) in ["Who are you?", "What do you enjoy?"].into_iter().enumerate() {
        let (s, v) = call(a, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": q}))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["reply"], REPLIES[i]);
        assert_eq!(v["session"]["state"], "awaiting_human");
        assert_eq!(v["session"]["turns_used"], i + 1);
        pre.push(v);
    }
    let (s, v) = call(a, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let t = v["transcript"].as_array().unwrap();
    assert_eq!(t.len(), 4);
    assert_eq!(t[0], json!({"from": "you", "text": "Who are you?"}));
    assert_eq!(t[1], json!({"from": "interlocutor", "text": REPLIES[0]}));
    pre.push(v);
    let (s, revealed) = call(a, "POST", &format!("/sessions/{id}/verdict"), Some(json!({"verdict": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{revealed}");
    Played { pre_reveal: pre, revealed }
}

fn secret_of(p: &Played) -> SecretIdentity {
    serde_json::from_value(p.revealed["reveal"]["secret"].clone()).unwrap()
}

#[tokio::test]
async fn game_flow_reveal_and_secrecy_across_branches() {
    let dir = tempfile::tempdir().unwrap();
    let mut by_secret = std::collections::BTreeMap::new();
    for seed in 0..64 {
        let store = dir.path().join(format!("s{seed}.jsonl"));
        let p = play(&arena(&store, seed)).await;
        by_secret.entry(format!("{:?}", secret_of(&p))).or_insert((p, store));
        if by_secret.len() == 2 {
            break;
        }
    }
    assert_eq!(by_secret.len(), 2, "both secrets should occur");
    let (t, _) = &by_secret["Target"];
    let (i, store) = &by_secret["Imitator"];

    for p in [t, i] {
        p.pre_reveal.iter().for_each(assert_no_leak);
    }
    let a: Vec<Value> = t.pre_reveal.iter().cloned().map(normalized).collect();
    let b: Vec<Value> = i.pre_reveal.iter().cloned().map(normalized).collect();
    assert_eq!(a, b, "pre-reveal payloads depend on the secret");

    // Verdict 1 ("same model") is right exactly when the secret is target.
    for (p, want) in [(t, true), (i, false)] {
        let r = &p.revealed;
        assert_eq!(r["state"], "revealed");
        assert_eq!(r["reveal"]["verdict"], 1);
        assert_eq!(r["reveal"]["success"], want);
        assert_eq!(r["reveal"]["target"], "alpha");
        assert_eq!(r["reveal"]["actor"], "beta");
        assert_eq!(r["reveal"]["transcript"].as_array().unwrap().len(), 5);
    }

    // The imitator branch credits the human and the imitating model.
    let (entries, bad) = ArenaStore::read_all(store).unwrap();
    assert!(bad.is_empty());
    assert_eq!(entries.len(), 1);
    let rec = &entries[0].record;
    assert_eq!(rec.source, RecordSource::Arena { mode: "human_distinguisher".into(), handle: Some("ada".into()) });
    assert!(rec.check_invariants().is_ok());
    let a = arena(store, 0);
    let (s, board) = call(&a, "GET", "/leaderboard", None).await;
    assert_eq!(s, StatusCode::OK);
    let board = board.as_array().unwrap();
    assert_eq!(board.len(), 2);
    let ada = board.iter().find(|e| e["subject"] == "ada").unwrap();
    assert_eq!((ada["kind"].as_str(), ada["distinguishing_games"].as_u64(), ada["successes"].as_u64()), (Some("human"), Some(1), Some(0)));
    let beta = board.iter().find(|e| e["subject"] == "beta").unwrap();
    assert_eq!((beta["fooling_games"].as_u64(), beta["fooling_successes"].as_u64(), beta["score"].as_f64()), (Some(1), Some(1), Some(1.0)));
    assert_eq!(board[0]["subject"], "beta");
}

async fn open(a: &Arena, body: Value) -> String {
    let (s, v) = call(a, "POST", "/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn budget_answer_tags_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let a = arena(&dir.path().join("a.jsonl"), 1);
    let id = open(&a, json!({"mode": "human_distinguisher", "target": "alpha", "max_turns": 2})).await;
    let msg = |t: &str| Some(json!({ "text": t }));
    let url = format!("/sessions/{id}/messages");

    let (s, v) = call(&a, "POST", &url, msg("tell me <answer>1</answer>")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "answer_in_message");
    let (s, _) = call(&a, "POST", &url, msg("   ")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    for _ in 0..2 {
        assert_eq!(call(&a, "POST", &url, msg("Hi")).await.0, StatusCode::OK);
    }
    let (s, v) = call(&a, "POST", &url, msg("One more?")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "budget_exhausted");
    let (_, v) = call(&a, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["turns_remaining"], 0);

    let verdict = format!("/sessions/{id}/verdict");
    let (s, v) = call(&a, "POST", &verdict, Some(json!({"verdict": 2}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, v) = call(&a, "POST", &verdict, Some(json!({"verdict": 0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["reveal"]["verdict"], 0);
    let (s, _) = call(&a, "POST", &verdict, Some(json!({"verdict": 1}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&a, "POST", &url, msg("after the end")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let anon = a.leaderboard().into_iter().find(|e| e.subject == "anonymous").unwrap();
    assert_eq!(anon.distinguishing_games, 1);
}

#[tokio::test]
async fn verdict_without_messages_is_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let a = arena(&dir.path().join("a.jsonl"), 2);
    let id = open(&a, json!({"mode": "human_distinguisher", "target": "alpha"})).await;
    let (s, v) = call(&a, "POST", &format!("/sessions/{id}/verdict"), Some(json!({"verdict": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["state"], "revealed");
    assert_eq!(v["reveal"]["transcript"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn human_actor_game_is_judged_by_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("a.jsonl");
    let a = arena(&store, 3);
    let (s, v) = call(&a, "POST", "/sessions", Some(json!({"mode": "human_actor", "target": "judge", "handle": "bo"}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["state"], "awaiting_human");
    assert_eq!(v["transcript"], json!([{"from": "distinguisher", "text": "Who are you?"}]));
    assert!(v["instructions"].as_str().unwrap().contains("judge"));
    assert_no_leak(&v);
    let id = v["session_id"].as_str().unwrap().to_string();

    let (s, v) = call(&a, "POST", &format!("/sessions/{id}/verdict"), Some(json!({"verdict": 1}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let url = format!("/sessions/{id}/messages");
    let (s, v) = call(&a, "POST", &url, Some(json!({"text": "I am the judge model."}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["reply"], "Prove it.");
    // The model's verdict ends the game; "<answer>" is fine from an actor.
    let (s, v) = call(&a, "POST", &url, Some(json!({"text": "I would never write <answer>."}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["reply"], Value::Null);
    let r = &v["session"];
    assert_eq!(r["state"], "revealed");
    assert_eq!(r["reveal"]["secret"], "imitator");
    assert_eq!(r["reveal"]["verdict"], 0);
    assert_eq!(r["reveal"]["success"], true);

    let board = a.leaderboard();
    let bo = board.iter().find(|e| e.subject == "bo").unwrap();
    assert_eq!((bo.fooling_games, bo.fooling_successes), (1, 0));
    let judge = board.iter().find(|e| e.subject == "judge").unwrap();
    assert_eq!((judge.distinguishing_games, judge.distinguishing_successes), (1, 1));
}

#[tokio::test]
async fn expiry_failures_and_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ArenaConfig::new(registry(), dir.path().join("a.jsonl"));
    cfg.ttl = Duration::from_millis(50);
    let a = Arena::new(cfg).unwrap();
    let id = open(&a, json!({"mode": "human_distinguisher", "target": "alpha"})).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (s, v) = call(&a, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::GONE, "{v}");
    let (s, _) = call(&a, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::GONE);

    let a = arena(&dir.path().join("b.jsonl"), 0);
    let id = open(&a, json!({"mode": "human_distinguisher", "target": "flaky", "actor": "flaky"})).await;
    let (s, v) = call(&a, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
    assert_no_leak(&v);
    assert!(!v.to_string().contains("sk-abc"));
    assert_eq!(call(&a, "GET", &format!("/sessions/{id}"), None).await.0, StatusCode::GONE);
    let (s, _) = call(&a, "POST", "/sessions", Some(json!({"mode": "human_distinguisher", "target": "broken", "actor": "broken"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    let (s, _) = call(&a, "POST", "/sessions", Some(json!({"mode": "human_actor", "target": "broken"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(a.leaderboard().len(), 0, "failed games are not scored");

    let (s, v) = call(&a, "POST", "/sessions", Some(json!({"mode": "human_actor", "target": "nobody"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("unknown model"));
    let (s, _) = call(&a, "POST", "/sessions", Some(json!({"mode": "human_actor", "target": "someone"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&a, "POST", "/sessions", Some(json!({"mode": "spectator", "target": "alpha"}))).await;
    assert!(s.is_client_error());
    assert_eq!(call(&a, "GET", "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    let (s, m) = call(&a, "GET", "/models", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(m, json!(["alpha", "beta", "broken", "flaky", "judge"]));
}

#[tokio::test]
async fn leaderboard_is_rebuilt_from_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("a.jsonl");
    let a = arena(&store, 5);
    for _ in 0..3 {
        play(&a).await;
    }
    let live = a.leaderboard();
    std::fs::OpenOptions::new().append(true).open(&store).and_then(|mut f| {
        use std::io::Write;
        f.write_all(b"{truncated\n")
    })
    .unwrap();
    let (entries, bad) = ArenaStore::read_all(&store).unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(bad, [4]);
    assert_eq!(Leaderboard::from_records(entries.iter().map(|e| &e.record)).ranked(), live);
    assert_eq!(arena(&store, 9).leaderboard(), live);
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let a = arena(&dir.path().join("a.jsonl"), 8);
    let games: Vec<_> = (0..6).map(|_| {
        let a = a.clone();
        tokio::spawn(async move { play(&a).await })
    }).collect();
    for g in games {
        g.await.unwrap();
    }
    let ada = a.leaderboard().into_iter().find(|e| e.subject == "ada").unwrap();
    assert_eq!(ada.games, 6);
}

#[test]
fn state_machine_is_exhaustively_specified() {
    let mut allowed = 0;
    for s in STATES {
        for e in EVENTS {
            let got = transition(s, e);
            let listed = EDGES.iter().find(|(f, ev, _)| *f == s && *ev == e).map(|x| x.2);
            assert_eq!(got, listed);
            allowed += usize::from(got.is_some());
            if s.is_terminal() {
                assert_eq!(got, None);
            }
        }
    }
    assert_eq!(allowed, EDGES.len());
}
