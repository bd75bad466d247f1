use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use csa_core::world::{preset, PRESET_NAMES};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot};

use crate::protocol::{ack, error_reply, parse_command, Telemetry, PROTOCOL_VERSION};
use crate::session::{Session, SessionConfig, TICK_S};
use crate::source::SceneSource;
use crate::ServiceError;

const RASTER_QUEUE: usize = 4;
const COMMAND_QUEUE: usize = 256;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Defaults for sessions whose request carries no config.
    pub session: SessionConfig,
    /// Wall-clock period of the simulation clock; `None` leaves the clock
    /// to explicit tick commands.
    pub tick_interval: Option<Duration>,
    /// Artificial delay before each inbound command is handled.
    pub latency: Duration,
    pub max_sessions: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            tick_interval: Some(Duration::from_secs_f64(TICK_S)),
            latency: Duration::ZERO,
            max_sessions: 64,
        }
    }
}

enum ToActor {
    Command { text: String, reply: mpsc::UnboundedSender<String> },
    Subscribe(mpsc::UnboundedSender<String>),
    Log(oneshot::Sender<Option<String>>),
    Snapshot(oneshot::Sender<Value>),
}

struct Handle {
    tx: mpsc::Sender<ToActor>,
    rasters: broadcast::Sender<Arc<str>>,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Handle>>>,
    next_id: Arc<AtomicU64>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { sessions: Arc::default(), next_id: Arc::new(AtomicU64::new(1)), config: Arc::new(config) }
    }

    fn handle(&self, id: &str) -> Option<(mpsc::Sender<ToActor>, broadcast::Sender<Arc<str>>)> {
        let map = self.sessions.lock().expect("session map lock");
        map.get(id).map(|h| (h.tx.clone(), h.rasters.clone()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_snapshot))
        .route("/sessions/{id}/log", get(session_log))
        .route("/scenes/presets", get(list_presets))
        .route("/session/{id}", get(session_ws))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await?;
    Ok(())
}

fn json_error(status: StatusCode, reason: impl Into<String>) -> Response {
    (status, axum::Json(json!({"v": PROTOCOL_VERSION, "error": reason.into()}))).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    v: Option<u32>,
    scene: SceneSource,
    #[serde(default)]
    config: Option<SessionConfig>,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Response {
    let req: CreateSession = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return json_error(StatusCode::BAD_REQUEST, format!("bad request: {e}")),
    };
    if req.v.is_some_and(|v| v != PROTOCOL_VERSION) {
        return json_error(StatusCode::BAD_REQUEST, "unsupported protocol version");
    }
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let config = req.config.unwrap_or_else(|| app.config.session.clone());
    let session = match Session::new(&id, &req.scene, config) {
        Ok(s) => s,
        Err(e) => return json_error(StatusCode::BAD_REQUEST, format!("scene load failed: {e}")),
    };
    let snapshot = session.snapshot();
    {
        let mut map = app.sessions.lock().expect("session map lock");
        if map.len() >= app.config.max_sessions {
            return json_error(StatusCode::SERVICE_UNAVAILABLE, "session limit reached");
        }
        let (tx, rx) = mpsc::channel(COMMAND_QUEUE);
        let (rasters, _) = broadcast::channel(RASTER_QUEUE);
        tokio::spawn(run_session(session, rx, rasters.clone(), app.config.tick_interval));
        map.insert(id.clone(), Handle { tx, rasters });
    }
    tracing::info!(session = %id, "session created");
    let body = json!({"v": PROTOCOL_VERSION, "id": id, "ws": format!("/session/{id}"), "snapshot": snapshot});
    (StatusCode::CREATED, axum::Json(body)).into_response()
}

async fn session_snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some((tx, _)) = app.handle(&id) else {
        return json_error(StatusCode::NOT_FOUND, format!("no session `{id}`"));
    };
    let (otx, orx) = oneshot::channel();
    if tx.send(ToActor::Snapshot(otx)).await.is_err() {
        return json_error(StatusCode::GONE, "session ended");
    }
    match orx.await {
        Ok(v) => axum::Json(v).into_response(),
        Err(_) => json_error(StatusCode::GONE, "session ended"),
    }
}

async fn session_log(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let Some((tx, _)) = app.handle(&id) else {
        return json_error(StatusCode::NOT_FOUND, format!("no session `{id}`"));
    };
    let (otx, orx) = oneshot::channel();
    if tx.send(ToActor::Log(otx)).await.is_err() {
        return json_error(StatusCode::GONE, "session ended");
    }
    match orx.await {
        Ok(Some(text)) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Ok(None) => json_error(StatusCode::NOT_FOUND, "nothing recorded yet"),
        Err(_) => json_error(StatusCode::GONE, "session ended"),
    }
}

async fn list_presets() -> Response {
    let presets: Vec<Value> = PRESET_NAMES
        .iter()
        .filter_map(|name| preset(name).ok())
        .map(|p| {
            let e = p.extent();
            json!({
                "name": p.name,
                "width_m": e.width(),
                "depth_m": e.height(),
                "ceiling_m": p.ceiling_height_m,
                "free_area_m2": p.free_area_m2(),
                "rooms": p.rooms.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    axum::Json(json!({"v": PROTOCOL_VERSION, "presets": presets})).into_response()
}

async fn session_ws(State(app): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some((tx, rasters)) = app.handle(&id) else {
        return json_error(StatusCode::NOT_FOUND, format!("no session `{id}`"));
    };
    let latency = app.config.latency;
    ws.on_upgrade(move |socket| client(socket, tx, rasters.subscribe(), latency))
}

/// One WebSocket client: inbound frames go to the session actor in arrival
/// order; replies and telemetry come back on an unbounded queue, rasters on
/// a small broadcast queue that drops the oldest.
async fn client(socket: WebSocket, tx: mpsc::Sender<ToActor>, mut rasters: broadcast::Receiver<Arc<str>>, latency: Duration) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    if tx.send(ToActor::Subscribe(out_tx.clone())).await.is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        loop {
            let text: String = tokio::select! {
                m = out_rx.recv() => match m {
                    Some(t) => t,
                    None => break,
                },
                r = rasters.recv() => match r {
                    Ok(t) => t.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::debug!("dropped {n} rasters for a slow client");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(frame) = stream.next().await {
        let text = match frame {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Binary(_)) => {
                let _ = out_tx.send(error_reply(&Value::Null, "binary frames are not supported"));
                continue;
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if !latency.is_zero() {
            tokio::time::sleep(latency).await;
        }
        if tx.send(ToActor::Command { text, reply: out_tx.clone() }).await.is_err() {
            break;
        }
    }
    drop(out_tx);
    writer.abort();
}

async fn run_session(
    mut session: Session,
    mut rx: mpsc::Receiver<ToActor>,
    rasters: broadcast::Sender<Arc<str>>,
    tick_interval: Option<Duration>,
) {
    let mut subscribers: Vec<mpsc::UnboundedSender<String>> = Vec::new();
    let mut clock = tick_interval.map(|d| {
        let mut i = tokio::time::interval(d);
        i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        i
    });
    let publish = |ts: Vec<Telemetry>, subs: &mut Vec<mpsc::UnboundedSender<String>>| {
        for t in ts {
            let text = t.to_json();
            if t.is_raster() {
                let _ = rasters.send(Arc::from(text));
            } else {
                subs.retain(|s| s.send(text.clone()).is_ok());
            }
        }
    };
    loop {
        let running = session.started() && clock.is_some();
        tokio::select! {
            msg = rx.recv() => {
                let Some(msg) = msg else { break };
                match msg {
                    ToActor::Command { text, reply } => {
                        let inbound = parse_command(&text);
                        match inbound.command.and_then(|c| session.handle(c)) {
                            Ok(ts) => {
                                publish(ts, &mut subscribers);
                                let _ = reply.send(ack(&inbound.request_id));
                            }
                            Err(reason) => {
                                let _ = reply.send(error_reply(&inbound.request_id, &reason));
                            }
                        }
                    }
                    ToActor::Subscribe(s) => subscribers.push(s),
                    ToActor::Log(r) => {
                        let _ = r.send(session.log().map(|l| l.to_jsonl()));
                    }
                    ToActor::Snapshot(r) => {
                        let _ = r.send(session.snapshot());
                    }
                }
            }
            _ = async { clock.as_mut().expect("guarded by running").tick().await }, if running => {
                let ts = session.tick();
                publish(ts, &mut subscribers);
            }
        }
    }
}
