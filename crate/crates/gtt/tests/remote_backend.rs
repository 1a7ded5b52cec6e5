use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use gtt::backends::remote::Secret;
use gtt::backends::{RecordingSleeper, RemoteAgent, RemoteBackend, RemoteSpec};
use gtt::core::protocol::{Agent, ChatTurn, FailureClass};
use serde_json::Value;

#[derive(Debug, Clone)]
struct Seen {
    headers: Vec<String>,
    body: String,
}

/// Answers each connection with the next canned (status, body) and records
/// what it received.
fn fake_gateway(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let h = std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut r = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                r.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            r.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen { headers, body: String::from_utf8(buf).unwrap() });
            let mut w = stream;
            write!(
                w,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            w.flush().unwrap();
        }
    });
    (url, seen, h)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "model": "vendor/model-x-2026",
        "provider": "upstream-a",
        "choices": [{"message": {"role": "assistant", "content": text}}]
    })
    .to_string()
}

/// Collects formatted log output of the current thread.
#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(b);
        Ok(b.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn history() -> Vec<ChatTurn> {
    vec![
        ChatTurn::instruction("You are judging.", Some("hello".into())),
        ChatTurn::assistant("Who made you?"),
        ChatTurn::user("A lab."),
    ]
}

const KEY: &str = "sk-test-9f8e7d6c5b4a";

#[test]
fn rate_limits_are_retried_with_backoff_and_logs_are_redacted() {
    let (url, seen, h) = fake_gateway(vec![
        (429, format!(r#"{{"error":"slow down","echo":"{KEY}"}}"#)),
        (429, r#"{"error":"slow down"}"#.into()),
        (200, ok_body("<answer>1</answer>")),
    ]);
    let sleeper = Arc::new(RecordingSleeper::default());
    let mut spec = RemoteSpec::new(url.clone(), "vendor/model-x");
    spec.params.insert("max_tokens".into(), Value::from(64));
    let backend = RemoteBackend::new(spec, url, Some(Secret::new(KEY)), sleeper.clone(), true).unwrap();
    let mut agent = RemoteAgent::new(Arc::new(backend), 7);

    let cap = Capture::default();
    let sub = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::DEBUG)
        .with_ansi(false)
        .with_writer({
            let c = cap.clone();
            move || c.clone()
        })
        .finish();
    let reply = tracing::subscriber::with_default(sub, || agent.respond(&history())).unwrap();
    h.join().unwrap();

    assert_eq!(reply, "<answer>1</answer>");
    let log = agent.last_attempts();
    assert_eq!(log.len(), 3);
    assert_eq!(log[0].class, Some(FailureClass::RateLimited));
    assert_eq!(log[0].status, Some(429));
    assert_eq!(log[2].status, Some(200));
    assert_eq!(log[2].class, None);
    let sleeps = sleeper.sleeps();
    assert_eq!(sleeps.len(), 2);
    assert!(sleeps[0].as_millis() <= 1000 && sleeps[1].as_millis() <= 2000, "{sleeps:?}");
    assert_eq!(log[0].backoff_ms, sleeps[0].as_millis() as u64);

    let route = agent.route();
    assert_eq!(route.provider.as_deref(), Some("upstream-a"));
    assert_eq!(route.model_id.as_deref(), Some("vendor/model-x-2026"));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    for s in seen.iter() {
        assert!(s.headers.iter().any(|h| h == &format!("authorization: Bearer {KEY}") || h == &format!("Authorization: Bearer {KEY}")));
        let v: Value = serde_json::from_str(&s.body).unwrap();
        let roles: Vec<&str> = v["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
        assert_eq!(roles, ["user", "assistant", "user"]);
        assert_eq!(v["max_tokens"], 64);
        assert!(v.get("temperature").is_none());
    }

    let text = String::from_utf8(cap.0.lock().unwrap().clone()).unwrap();
    assert!(text.contains("gtt::http"), "debug log missing: {text}");
    assert!(text.contains("[REDACTED]"));
    assert!(!text.contains(KEY), "secret leaked into logs: {text}");
    for a in log {
        assert!(!a.detail.contains(KEY));
    }
    assert!(!format!("{agent_dbg:?}", agent_dbg = Secret::new(KEY)).contains(KEY));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, h) = fake_gateway(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let sleeper = Arc::new(RecordingSleeper::default());
    let backend = RemoteBackend::new(RemoteSpec::new(url.clone(), "m"), url, None, sleeper.clone(), false).unwrap();
    let mut agent = RemoteAgent::new(Arc::new(backend), 1);
    let err = agent.respond(&history()).unwrap_err();
    h.join().unwrap();
    assert_eq!(err.class, FailureClass::Client);
    assert_eq!(err.attempts.len(), 1);
    assert_eq!(err.attempts[0].status, Some(401));
    assert!(sleeper.sleeps().is_empty());
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert!(seen.lock().unwrap()[0].headers.iter().all(|h| !h.to_ascii_lowercase().starts_with("authorization")));
}

#[test]
fn server_errors_exhaust_the_retry_budget() {
    let mut spec = RemoteSpec::new("", "m");
    spec.retry.max_retries = 2;
    let (url, _, h) = fake_gateway(vec![(503, "{}".into()), (502, "{}".into()), (500, "{}".into())]);
    let sleeper = Arc::new(RecordingSleeper::default());
    let backend = RemoteBackend::new(spec, url, None, sleeper.clone(), false).unwrap();
    let err = RemoteAgent::new(Arc::new(backend), 3).respond(&history()).unwrap_err();
    h.join().unwrap();
    assert_eq!(err.class, FailureClass::Server);
    assert_eq!(err.attempts.len(), 3);
    assert_eq!(sleeper.sleeps().len(), 2);
}

#[test]
fn malformed_and_unreachable_are_classified() {
    let (url, _, h) = fake_gateway(vec![(200, "not json".into())]);
    let mut spec = RemoteSpec::new("", "m");
    spec.retry.max_retries = 0;
    let b = RemoteBackend::new(spec.clone(), url, None, Arc::new(RecordingSleeper::default()), false).unwrap();
    let err = RemoteAgent::new(Arc::new(b), 0).respond(&history()).unwrap_err();
    h.join().unwrap();
    assert_eq!(err.class, FailureClass::Malformed);

    let closed = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let b = RemoteBackend::new(spec, format!("http://{closed}/x"), None, Arc::new(RecordingSleeper::default()), false)
        .unwrap();
    let err = RemoteAgent::new(Arc::new(b), 0).respond(&history()).unwrap_err();
    assert_eq!(err.class, FailureClass::Connection, "{err:?}");
}

#[test]
fn endpoint_and_key_come_from_the_environment() {
    let mut spec = RemoteSpec::new("", "m");
    spec.url = None;
    spec.url_env = "GTT_TEST_UNSET_GATEWAY_VAR".into();
    let err = RemoteBackend::from_env(spec, Arc::new(RecordingSleeper::default())).unwrap_err();
    assert!(err.to_string().contains("GTT_TEST_UNSET_GATEWAY_VAR"), "{err}");
}
