//! Live guidance sessions over HTTP and WebSocket.
//!
//! `POST /sessions` starts an episode and answers `{id}`. The body is JSON
//! with optional fields `setting` ("3v3"), `config` (a full or partial
//! world config), `seed`, `bind` (team spec), `pacing` (1.0 = real time,
//! 0 = as fast as possible) and `paused`.
//!
//! `GET /sessions/<id>/result` answers 200 with the result once the episode
//! is over, 202 while it runs, 404 for unknown ids.
//!
//! `/session/<id>` is a WebSocket. The server first sends
//! `{type:"map", arena_side, obstacles}`, then a `state` message after every
//! decision period (2 Hz at real time) and an `end` message with the
//! result. Clients send `{type:"select", id}`, `{type:"waypoint", x, y}`,
//! `{type:"release", id}`, `{type:"pause"}` or `{type:"resume"}`; each is
//! answered with `{type:"ack", tick}` or `{type:"error", reason}`. Commands
//! take effect at the next decision tick.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, oneshot};

use hideseek_core::config::{Setting, WorldConfig};
use hideseek_core::dataset::EpisodeLog;
use hideseek_core::episode::{Episode, EpisodeOptions, EpisodeResult};
use hideseek_core::geometry::ObstacleSpec;
use hideseek_core::guidance::{Command, Intervention};
use hideseek_core::policy::Team;
use hideseek_core::world::{AgentId, Role, Status};

use crate::binding::{bind_team, build_team, heuristic_bindings, Registry};
use crate::bridge::DEFAULT_DEADLINE;
use crate::store::Dataset;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub setting: Option<String>,
    pub config: Option<WorldConfig>,
    pub seed: Option<u64>,
    pub bind: Option<String>,
    pub pacing: Option<f64>,
    pub paused: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub id: u64,
    /// `success`, `timeout` or `aborted`.
    pub outcome: String,
    pub result: EpisodeResult,
    pub interventions: Vec<Intervention>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ClientMsg {
    Select { id: AgentId },
    Waypoint { x: f64, y: f64 },
    Release { id: AgentId },
    Pause,
    Resume,
}

type Reply = oneshot::Sender<Result<u64, String>>;

enum Inbound {
    Command(Command, Reply),
    Pause(bool, Reply),
}

struct Session {
    inbox: Mutex<mpsc::Sender<Inbound>>,
    states: broadcast::Sender<Arc<str>>,
    map: String,
    latest: Mutex<Option<Arc<str>>>,
    result: Mutex<Option<SessionResult>>,
}

pub struct GuideOptions {
    /// Dataset directory for finished sessions.
    pub record: Option<PathBuf>,
    pub registry: Registry,
    pub deadline: Duration,
}

impl Default for GuideOptions {
    fn default() -> Self {
        GuideOptions { record: None, registry: Registry::new(), deadline: DEFAULT_DEADLINE }
    }
}

pub struct AppState {
    sessions: Mutex<BTreeMap<u64, Arc<Session>>>,
    next_id: AtomicU64,
    registry: Registry,
    deadline: Duration,
    recorder: Option<Arc<Mutex<Dataset>>>,
}

impl AppState {
    pub fn new(opts: GuideOptions) -> Result<Arc<Self>, crate::store::StoreError> {
        let recorder = match &opts.record {
            Some(dir) => Some(Dataset::open_or_create(dir, "guidance")?),
            None => None,
        };
        // Continue numbering after any episodes already recorded.
        let first = recorder.as_ref().and_then(|d| d.manifest().episodes.iter().map(|e| e.episode_id + 1).max()).unwrap_or(1);
        Ok(Arc::new(AppState {
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(first),
            registry: opts.registry,
            deadline: opts.deadline,
            recorder: recorder.map(|d| Arc::new(Mutex::new(d))),
        }))
    }

    fn session(&self, id: u64) -> Option<Arc<Session>> {
        self.sessions.lock().unwrap().get(&id).cloned()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/result", get(session_result))
        .route("/session/{id}", get(session_socket))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn bad_request(msg: impl ToString) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": msg.to_string() }))).into_response()
}

fn build_config(req: &SessionRequest) -> Result<WorldConfig, String> {
    let mut config = req.config.clone().unwrap_or_default();
    if let Some(s) = &req.setting {
        let setting: Setting = s.parse().map_err(|e: hideseek_core::config::ConfigError| e.to_string())?;
        config.n_seekers = setting.n_seekers;
        config.n_hiders = setting.n_hiders;
    }
    config.validate().map_err(|e| format!("invalid config: {e}"))?;
    Ok(config)
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<SessionRequest>) -> Response {
    let config = match build_config(&req) {
        Ok(c) => c,
        Err(e) => return bad_request(e),
    };
    let pacing = req.pacing.unwrap_or(1.0);
    if !pacing.is_finite() || pacing < 0.0 {
        return bad_request("pacing must be a finite number ≥ 0");
    }
    let bindings = match &req.bind {
        Some(spec) => match bind_team(config.setting(), spec, &app.registry, config.frame_stack) {
            Ok(b) => b,
            Err(e) => return bad_request(e),
        },
        None => heuristic_bindings(&config),
    };
    let seed = req.seed.unwrap_or(config.seed);
    let team = match build_team(&bindings, &config, seed, app.deadline) {
        Ok(t) => t,
        Err(e) => return bad_request(e),
    };
    let ep = match Episode::new(&config, seed, EpisodeOptions::default()) {
        Ok(ep) => ep,
        Err(e) => return bad_request(e),
    };
    let id = app.next_id.fetch_add(1, Ordering::SeqCst);
    let (tx, rx) = mpsc::channel();
    let (states, _) = broadcast::channel(64);
    let map = json!({
        "type": "map",
        "arena_side": config.arena_side,
        "obstacles": ep.world.obstacles.iter().map(|o| ObstacleSpec::from(o.clone())).collect::<Vec<_>>(),
    })
    .to_string();
    let session = Arc::new(Session {
        inbox: Mutex::new(tx),
        states,
        map,
        latest: Mutex::new(None),
        result: Mutex::new(None),
    });
    app.sessions.lock().unwrap().insert(id, session.clone());
    let runner = Runner {
        id,
        ep,
        team,
        log: app.recorder.as_ref().map(|_| EpisodeLog::new(id)),
        inbox: rx,
        session,
        pacing,
        paused: req.paused.unwrap_or(false),
        recorder: app.recorder.clone(),
    };
    thread::Builder::new().name(format!("session-{id}")).spawn(move || runner.run()).expect("spawn session thread");
    (StatusCode::CREATED, Json(json!({ "id": id }))).into_response()
}

async fn session_result(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let Some(s) = app.session(id) else {
        return (StatusCode::NOT_FOUND, Json(json!({ "error": format!("no session {id}") }))).into_response();
    };
    let result = s.result.lock().unwrap().clone();
    match result {
        Some(r) => Json(r).into_response(),
        None => (StatusCode::ACCEPTED, Json(json!({ "status": "running" }))).into_response(),
    }
}

async fn session_socket(State(app): State<Arc<AppState>>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Response {
    match app.session(id) {
        Some(s) => ws.on_upgrade(move |socket| drive_socket(socket, s)),
        None => (StatusCode::NOT_FOUND, Json(json!({ "error": format!("no session {id}") }))).into_response(),
    }
}

async fn drive_socket(mut socket: WebSocket, session: Arc<Session>) {
    let mut states = session.states.subscribe();
    if socket.send(Message::Text(session.map.clone().into())).await.is_err() {
        return;
    }
    let latest = session.latest.lock().unwrap().clone();
    if let Some(s) = latest {
        if socket.send(Message::Text(s.to_string().into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            msg = states.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = handle_client(&session, text.as_str()).await;
                if socket.send(Message::Text(reply.into())).await.is_err() {
                    return;
                }
            }
        }
    }
}

async fn handle_client(session: &Session, text: &str) -> String {
    let msg: ClientMsg = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return json!({ "type": "error", "reason": format!("bad message: {e}") }).to_string(),
    };
    let (tx, rx) = oneshot::channel();
    let inbound = match msg {
        ClientMsg::Select { id } => Inbound::Command(Command::Select { id }, tx),
        ClientMsg::Waypoint { x, y } => Inbound::Command(Command::Waypoint { x, y }, tx),
        ClientMsg::Release { id } => Inbound::Command(Command::Release { id }, tx),
        ClientMsg::Pause => Inbound::Pause(true, tx),
        ClientMsg::Resume => Inbound::Pause(false, tx),
    };
    if session.inbox.lock().unwrap().send(inbound).is_err() {
        return json!({ "type": "error", "reason": "session has ended" }).to_string();
    }
    match rx.await {
        Ok(Ok(tick)) => json!({ "type": "ack", "tick": tick }).to_string(),
        Ok(Err(reason)) => json!({ "type": "error", "reason": reason }).to_string(),
        Err(_) => json!({ "type": "error", "reason": "session has ended" }).to_string(),
    }
}

/// The single loop that owns a session's world.
struct Runner {
    id: u64,
    ep: Episode,
    team: Team,
    log: Option<EpisodeLog>,
    inbox: mpsc::Receiver<Inbound>,
    session: Arc<Session>,
    pacing: f64,
    paused: bool,
    recorder: Option<Arc<Mutex<Dataset>>>,
}

impl Runner {
    fn state_message(&self, status: Status) -> Arc<str> {
        let w = &self.ep.world;
        let agents: Vec<_> = w
            .agents
            .iter()
            .map(|a| {
                json!({
                    "id": a.id,
                    "role": if a.role == Role::Seeker { "seeker" } else { "hider" },
                    "x": a.pos.x, "y": a.pos.y, "o": a.heading, "alive": a.alive,
                })
            })
            .collect();
        let status = match status {
            Status::Ongoing => "ongoing",
            Status::Success => "success",
            Status::Timeout => "timeout",
        };
        json!({
            "type": "state",
            "tick": w.tick,
            "time": w.time(),
            "time_left": w.time_left(),
            "status": status,
            "paused": self.paused,
            "agents": agents,
            "selected": self.ep.guidance.selected(),
            "interventions": self.ep.guidance.interventions(),
        })
        .to_string()
        .into()
    }

    fn publish(&self, status: Status) {
        let msg = self.state_message(status);
        *self.session.latest.lock().unwrap() = Some(msg.clone());
        let _ = self.session.states.send(msg);
    }

    fn handle(&mut self, msg: Inbound) {
        let tick = self.ep.world.tick;
        match msg {
            Inbound::Command(cmd, reply) => {
                let _ = reply.send(self.ep.guidance.submit(cmd).map(|_| tick).map_err(|e| e.to_string()));
            }
            Inbound::Pause(p, reply) => {
                self.paused = p;
                self.publish(self.ep.status());
                let _ = reply.send(Ok(tick));
            }
        }
    }

    fn run(mut self) {
        if let Some(log) = self.log.as_mut() {
            self.ep.begin_log(log);
        }
        self.publish(Status::Ongoing);
        let dt = self.ep.world.config.physics_dt;
        let mut clock = Instant::now();
        let mut paced_ticks = 0u32;
        let error = loop {
            while let Ok(m) = self.inbox.try_recv() {
                self.handle(m);
            }
            if self.paused {
                if let Ok(m) = self.inbox.recv_timeout(Duration::from_millis(20)) {
                    self.handle(m);
                }
                clock = Instant::now();
                paced_ticks = 0;
                continue;
            }
            let status = match self.ep.tick(&mut self.team, None, self.log.as_mut()) {
                Ok(s) => s,
                Err(e) => break Some(e.to_string()),
            };
            if status != Status::Ongoing {
                self.publish(status);
                break None;
            }
            if self.ep.world.is_decision_tick() {
                self.publish(status);
            }
            if self.pacing > 0.0 {
                paced_ticks += 1;
                let due = clock + Duration::from_secs_f64(dt * paced_ticks as f64 / self.pacing);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
        };
        self.finish(error);
    }

    fn finish(mut self, error: Option<String>) {
        let result = self.ep.result();
        let outcome = match (&error, result.outcome) {
            (Some(_), _) => "aborted".to_owned(),
            (None, o) => serde_json::to_value(o).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        };
        let mut error = error;
        if let (Some(rec), Some(log), None) = (&self.recorder, self.log.take(), &error) {
            if let Err(e) = rec.lock().unwrap().write_episode(&log) {
                error = Some(format!("recording failed: {e}"));
            }
        }
        let r = SessionResult {
            id: self.id,
            outcome,
            result,
            interventions: self.ep.guidance.interventions().to_vec(),
            error,
        };
        let end = json!({ "type": "end", "result": r }).to_string();
        *self.session.result.lock().unwrap() = Some(r);
        let _ = self.session.states.send(end.into());
    }
}
