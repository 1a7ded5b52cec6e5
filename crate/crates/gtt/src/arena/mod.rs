//! Live games between a person and configured models over HTTP+JSON.
//!
//! Each session runs the ordinary trial engine on its own thread, with the
//! person's seat filled by a [`HumanRelay`]. The secret is drawn when the
//! session is created and only leaves the server inside a reveal.
//!
//! Routes: `POST /sessions`, `GET /sessions/{id}`,
//! `POST /sessions/{id}/messages`, `POST /sessions/{id}/verdict`,
//! `GET /leaderboard`, `GET /models`.

pub mod board;
pub mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use gtt_core::protocol::{
    Channel, ChatRole, ChatTurn, EnvBlock, Message, ProtocolVariant, RecordSource, SecretIdentity, TrialConfig,
    TrialRecord, TurnKind, run_trial,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::{UnboundedReceiver, unbounded_channel};

use crate::SystemClock;
use crate::backends::{HumanInput, HumanRelay, HumanSeatRoster, Registry};
pub use board::{ArenaEntry, ArenaStore, Leaderboard, LeaderboardEntry};
pub use session::{Mode, SessionEvent, SessionState, transition};

/// Roster name of the person's seat. Not a valid campaign model name.
pub const HUMAN_MODEL: &str = "@human";

#[derive(Clone)]
pub struct ArenaConfig {
    pub registry: Registry,
    /// Messages the person may send as distinguisher before deciding; in
    /// human-actor mode, the model distinguisher's turn cap.
    pub max_turns: u32,
    pub ttl: Duration,
    pub store_path: PathBuf,
    /// Seeds secret draws; entropy from the OS when absent.
    pub secret_seed: Option<u64>,
    pub env: EnvBlock,
}

impl ArenaConfig {
    pub fn new(registry: Registry, store_path: impl Into<PathBuf>) -> Self {
        ArenaConfig {
            registry,
            max_turns: gtt_core::protocol::DEFAULT_MAX_DISTINGUISHER_TURNS,
            ttl: Duration::from_secs(30 * 60),
            store_path: store_path.into(),
            secret_seed: None,
            env: EnvBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), error: error.into(), message: message.into() }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub mode: Mode,
    pub target: String,
    /// Imitating model in human-distinguisher mode; defaults to the target.
    #[serde(default)]
    pub actor: Option<String>,
    #[serde(default)]
    pub handle: Option<String>,
    /// Lower than the server budget only.
    #[serde(default)]
    pub max_turns: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    You,
    Interlocutor,
    Distinguisher,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewMessage {
    pub from: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reveal {
    pub secret: SecretIdentity,
    pub actor: String,
    pub target: String,
    pub verdict: Option<u8>,
    pub success: Option<bool>,
    pub transcript: Vec<Message>,
}

/// What the person sees. Carries no secret until `reveal` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub mode: Mode,
    pub target: String,
    pub state: SessionState,
    pub turns_used: u32,
    pub turns_remaining: u32,
    pub instructions: Option<String>,
    pub transcript: Vec<ViewMessage>,
    pub expires_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal: Option<Reveal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageReply {
    /// Counterpart's answer; absent when the game ended instead.
    pub reply: Option<String>,
    pub session: SessionView,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PostVerdict {
    /// 1: the interlocutor is the target; 0: it is an imitator.
    pub verdict: u8,
}

enum TrialEvent {
    Turn(Vec<ChatTurn>),
    Finished(Box<TrialRecord>),
}

struct Session {
    id: String,
    mode: Mode,
    actor: String,
    target: String,
    handle: Option<String>,
    secret: SecretIdentity,
    state: SessionState,
    max_turns: u32,
    human_turns: u32,
    history: Vec<ChatTurn>,
    last_active: Instant,
    last_active_at: DateTime<Utc>,
    ttl: Duration,
    tx: Option<std::sync::mpsc::Sender<HumanInput>>,
    events: UnboundedReceiver<TrialEvent>,
    record: Option<TrialRecord>,
}

enum Pumped {
    Turn(Option<String>),
    Finished,
}

impl Session {
    fn apply(&mut self, e: SessionEvent) -> Result<(), ApiError> {
        match transition(self.state, e) {
            Some(s) => {
                self.state = s;
                Ok(())
            }
            None => Err(ApiError::conflict(format!("not allowed while session is {:?}", self.state))),
        }
    }

    fn touch(&mut self) {
        self.last_active = Instant::now();
        self.last_active_at = Utc::now();
    }

    fn expire_if_idle(&mut self) -> Result<(), ApiError> {
        if !self.state.is_terminal() && self.last_active.elapsed() > self.ttl {
            self.state = SessionState::Expired;
            self.tx = None;
        }
        if self.state == SessionState::Expired {
            return Err(ApiError::new(StatusCode::GONE, "expired", "session expired"));
        }
        Ok(())
    }

    fn counterpart(&self) -> Speaker {
        match self.mode {
            Mode::HumanDistinguisher => Speaker::Interlocutor,
            Mode::HumanActor => Speaker::Distinguisher,
        }
    }

    fn view(&self) -> SessionView {
        let other = self.counterpart();
        let mut instructions = None;
        let mut transcript = Vec::new();
        for t in &self.history {
            match (&t.kind, t.role) {
                (TurnKind::Instruction { embedded }, _) => {
                    instructions.get_or_insert_with(|| t.content.clone());
                    if let Some(m) = embedded {
                        transcript.push(ViewMessage { from: other, text: m.clone() });
                    }
                }
                (TurnKind::Message, ChatRole::Assistant) => {
                    transcript.push(ViewMessage { from: Speaker::You, text: t.content.clone() })
                }
                (TurnKind::Message, ChatRole::User) => {
                    transcript.push(ViewMessage { from: other, text: t.content.clone() })
                }
            }
        }
        let ttl = chrono::Duration::from_std(self.ttl).unwrap_or(chrono::Duration::MAX);
        SessionView {
            session_id: self.id.clone(),
            mode: self.mode,
            target: self.target.clone(),
            state: self.state,
            turns_used: self.human_turns,
            turns_remaining: self.max_turns.saturating_sub(self.human_turns),
            instructions,
            transcript,
            expires_at: self.last_active_at.checked_add_signed(ttl).unwrap_or(DateTime::<Utc>::MAX_UTC),
            reveal: (self.state == SessionState::Revealed).then(|| self.reveal()).flatten(),
        }
    }

    fn reveal(&self) -> Option<Reveal> {
        let r = self.record.as_ref()?;
        Some(Reveal {
            secret: self.secret,
            actor: self.actor.clone(),
            target: self.target.clone(),
            verdict: r.parsed.bit().map(u8::from),
            success: r.success,
            transcript: r.messages(Channel::Main).cloned().collect(),
        })
    }
}

struct Book {
    store: ArenaStore,
    board: Leaderboard,
}

struct Inner {
    cfg: ArenaConfig,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    book: Mutex<Book>,
    coin: Mutex<ChaCha8Rng>,
}

/// Shared arena state; clones share everything.
#[derive(Clone)]
pub struct Arena {
    inner: Arc<Inner>,
}

impl Arena {
    /// Opens the store and rebuilds the leaderboard from it.
    pub fn new(cfg: ArenaConfig) -> std::io::Result<Self> {
        let (entries, bad) = ArenaStore::read_all(&cfg.store_path)?;
        if !bad.is_empty() {
            tracing::warn!(lines = ?bad, "unreadable arena store lines skipped");
        }
        let board = Leaderboard::from_records(entries.iter().map(|e| &e.record));
        let store = ArenaStore::open(&cfg.store_path)?;
        let seed = cfg.secret_seed.unwrap_or_else(|| rand::rng().next_u64());
        Ok(Arena {
            inner: Arc::new(Inner {
                cfg,
                sessions: Mutex::new(HashMap::new()),
                book: Mutex::new(Book { store, board }),
                coin: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            }),
        })
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/sessions", post(create_h))
            .route("/sessions/{id}", get(get_h))
            .route("/sessions/{id}/messages", post(message_h))
            .route("/sessions/{id}/verdict", post(verdict_h))
            .route("/leaderboard", get(board_h))
            .route("/models", get(models_h))
            .with_state(self.clone())
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        self.inner.book.lock().unwrap().board.ranked()
    }

    pub fn models(&self) -> Vec<String> {
        let reg = &self.inner.cfg.registry;
        reg.names().filter(|n| !reg.is_human(n)).map(str::to_string).collect()
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}")))
    }

    fn check_model(&self, name: &str) -> Result<(), ApiError> {
        let reg = &self.inner.cfg.registry;
        if reg.contains(name) && !reg.is_human(name) {
            Ok(())
        } else {
            Err(ApiError::new(StatusCode::BAD_REQUEST, "unknown_model", format!("unknown model {name:?}")))
        }
    }

    pub async fn create(&self, req: CreateSession) -> Result<SessionView, ApiError> {
        let cfg = &self.inner.cfg;
        self.check_model(&req.target)?;
        let actor = req.actor.clone().unwrap_or_else(|| req.target.clone());
        if req.mode == Mode::HumanDistinguisher {
            self.check_model(&actor)?;
        }
        if let Some(h) = &req.handle {
            if h.is_empty() || h.chars().count() > 40 || h.chars().any(char::is_control) {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_handle", "handle must be 1-40 printable characters"));
            }
        }
        let max_turns = req.max_turns.unwrap_or(cfg.max_turns).clamp(1, cfg.max_turns.max(1));
        let (secret, seed) = {
            let mut coin = self.inner.coin.lock().unwrap();
            let s = if coin.random_bool(0.5) { SecretIdentity::Target } else { SecretIdentity::Imitator };
            (s, coin.next_u64())
        };
        let id = uuid::Uuid::new_v4().to_string();
        let (variant, secret, cap) = match req.mode {
            // The person is a third-party judge; the verdict is one extra turn.
            Mode::HumanDistinguisher => (ProtocolVariant::fixed(HUMAN_MODEL, &actor, &req.target), secret, max_turns + 1),
            // The person is always the interlocutor, so always the imitator.
            Mode::HumanActor => (ProtocolVariant::gtt(HUMAN_MODEL, &req.target), SecretIdentity::Imitator, max_turns),
        };
        let mut config = TrialConfig::new(id.clone(), variant, seed);
        config.max_distinguisher_turns = cap;
        config.secret = Some(secret);

        let (ev_tx, events) = unbounded_channel();
        let turn_tx = ev_tx.clone();
        let (relay, tx) = HumanRelay::new(
            Box::new(move |h: &[ChatTurn]| {
                let _ = turn_tx.send(TrialEvent::Turn(h.to_vec()));
            }),
            req.handle.clone(),
        );
        let roster = HumanSeatRoster::new(cfg.registry.clone(), HUMAN_MODEL, relay);
        std::thread::Builder::new()
            .name(format!("arena-{id}"))
            .spawn(move || {
                let mut roster = roster;
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                if let Ok(rec) = run_trial(&config, &mut roster, &SystemClock, &mut rng) {
                    let _ = ev_tx.send(TrialEvent::Finished(Box::new(rec)));
                }
            })
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;

        let mut s = Session {
            id: id.clone(),
            mode: req.mode,
            actor: if req.mode == Mode::HumanActor { HUMAN_MODEL.into() } else { actor },
            target: req.target,
            handle: req.handle,
            secret,
            state: SessionState::Open,
            max_turns,
            human_turns: 0,
            history: Vec::new(),
            last_active: Instant::now(),
            last_active_at: Utc::now(),
            ttl: cfg.ttl,
            tx: Some(tx),
            events,
            record: None,
        };
        match self.pump(&mut s).await? {
            Pumped::Turn(incoming) => {
                if req.mode == Mode::HumanActor || incoming.is_some() {
                    s.apply(SessionEvent::AgentReplied)?;
                }
            }
            Pumped::Finished => s.apply(SessionEvent::TrialFinished)?,
        }
        let view = s.view();
        self.inner.sessions.lock().unwrap().insert(id, Arc::new(tokio::sync::Mutex::new(s)));
        Ok(view)
    }

    /// Waits for the trial thread's next event.
    async fn pump(&self, s: &mut Session) -> Result<Pumped, ApiError> {
        match s.events.recv().await {
            Some(TrialEvent::Turn(h)) => {
                let incoming = h.last().filter(|t| t.role == ChatRole::User).and_then(|t| t.visible()).map(str::to_string);
                s.history = h;
                Ok(Pumped::Turn(incoming))
            }
            Some(TrialEvent::Finished(rec)) => {
                let mut rec = *rec;
                rec.source = RecordSource::Arena { mode: s.mode.as_str().into(), handle: s.handle.clone() };
                rec.env = self.inner.cfg.env.clone();
                let failure = rec.failure.clone();
                {
                    let mut book = self.inner.book.lock().unwrap();
                    book.store
                        .append(&ArenaEntry { session_id: s.id.clone(), record: rec.clone() })
                        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()))?;
                    book.board.record(&rec);
                }
                s.record = Some(rec);
                s.tx = None;
                if let Some(f) = failure {
                    // Which seat failed would tell the person who was talking.
                    tracing::warn!(session = %s.id, seat = ?f.seat, error = %f.failure, "arena game failed");
                    s.state = session::transition(s.state, SessionEvent::Expire).unwrap_or(s.state);
                    return Err(ApiError::new(
                        StatusCode::BAD_GATEWAY,
                        "counterpart_failed",
                        "a model in this game is unavailable; start a new session",
                    ));
                }
                Ok(Pumped::Finished)
            }
            None => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "game thread ended")),
        }
    }

    pub async fn get(&self, id: &str) -> Result<SessionView, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().await;
        s.expire_if_idle()?;
        Ok(s.view())
    }

    pub async fn post_message(&self, id: &str, text: String) -> Result<MessageReply, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().await;
        s.expire_if_idle()?;
        if !s.state.accepts_human() {
            return Err(ApiError::conflict(format!("session is {:?}", s.state)));
        }
        if text.trim().is_empty() {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_message", "message is empty"));
        }
        if s.mode == Mode::HumanDistinguisher && text.contains("<answer>") {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "answer_in_message",
                "submit verdicts through the verdict endpoint",
            ));
        }
        if s.human_turns >= s.max_turns {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "budget_exhausted",
                format!("all {} turns used; submit a verdict", s.max_turns),
            ));
        }
        s.apply(SessionEvent::HumanMessage)?;
        s.human_turns += 1;
        s.touch();
        let sent = s.tx.as_ref().is_some_and(|tx| tx.send(HumanInput::Message(text)).is_ok());
        if !sent {
            s.state = SessionState::Expired;
            return Err(ApiError::new(StatusCode::GONE, "expired", "session ended"));
        }
        let reply = match self.pump(&mut s).await? {
            Pumped::Turn(incoming) => {
                s.apply(SessionEvent::AgentReplied)?;
                incoming
            }
            Pumped::Finished => {
                s.apply(SessionEvent::TrialFinished)?;
                None
            }
        };
        s.touch();
        Ok(MessageReply { reply, session: s.view() })
    }

    pub async fn verdict(&self, id: &str, verdict: u8) -> Result<SessionView, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().await;
        s.expire_if_idle()?;
        if verdict > 1 {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_verdict", "verdict must be 0 or 1"));
        }
        if s.mode != Mode::HumanDistinguisher {
            return Err(ApiError::conflict("the model gives the verdict in human_actor sessions"));
        }
        s.apply(SessionEvent::Verdict)?;
        s.touch();
        let sent = s.tx.as_ref().is_some_and(|tx| tx.send(HumanInput::Verdict(verdict == 1)).is_ok());
        if !sent {
            s.state = SessionState::Expired;
            return Err(ApiError::new(StatusCode::GONE, "expired", "session ended"));
        }
        if let Pumped::Turn(_) = self.pump(&mut s).await? {
            return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "verdict not accepted"));
        }
        s.apply(SessionEvent::TrialFinished)?;
        Ok(s.view())
    }

    /// Expires idle sessions and forgets those expired for a full TTL.
    pub async fn sweep(&self) {
        let all: Vec<_> = self.inner.sessions.lock().unwrap().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut forget = Vec::new();
        for (id, s) in all {
            let Ok(mut s) = s.try_lock() else { continue };
            let _ = s.expire_if_idle();
            if s.state.is_terminal() && s.last_active.elapsed() > 2 * s.ttl {
                forget.push(id);
            }
        }
        let mut map = self.inner.sessions.lock().unwrap();
        for id in forget {
            map.remove(&id);
        }
    }
}

async fn create_h(State(a): State<Arena>, Json(req): Json<CreateSession>) -> Response {
    match a.create(req).await {
        Ok(v) => (StatusCode::CREATED, Json(v)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_h(State(a): State<Arena>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    a.get(&id).await.map(Json)
}

async fn message_h(
    State(a): State<Arena>,
    UrlPath(id): UrlPath<String>,
    Json(m): Json<PostMessage>,
) -> Result<Json<MessageReply>, ApiError> {
    a.post_message(&id, m.text).await.map(Json)
}

async fn verdict_h(
    State(a): State<Arena>,
    UrlPath(id): UrlPath<String>,
    Json(v): Json<PostVerdict>,
) -> Result<Json<SessionView>, ApiError> {
    a.verdict(&id, v.verdict).await.map(Json)
}

async fn board_h(State(a): State<Arena>) -> Json<Vec<LeaderboardEntry>> {
    Json(a.leaderboard())
}

async fn models_h(State(a): State<Arena>) -> Json<Vec<String>> {
    Json(a.models())
}

/// Serves the arena until the process ends, sweeping idle sessions.
pub async fn serve(arena: Arena, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "arena listening");
    let sweeper = arena.clone();
    let period = (arena.inner.cfg.ttl / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep().await;
        }
    });
    axum::serve(listener, arena.router()).await
}
