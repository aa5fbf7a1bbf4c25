//! WebSocket endpoint at `/ws` plus an HTTP fallback.
//!
//! - `GET /ws`: JSON text messages both ways. Auto-mode sessions created on a
//!   socket push their frames to it.
//! - `POST /api/messages`: one client message in, one server message out.
//! - `GET /api/sessions/:id`: the current frame.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc};

use crate::protocol::{ClientMessage, Frame, Mode, ServerMessage};
use crate::session::SessionManager;

pub struct AppState {
    manager: SessionManager,
    channels: Mutex<HashMap<String, broadcast::Sender<Frame>>>,
    ticking: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(manager: SessionManager) -> Arc<Self> {
        Arc::new(Self {
            manager,
            channels: Mutex::new(HashMap::new()),
            ticking: Mutex::new(HashSet::new()),
        })
    }

    pub fn manager(&self) -> &SessionManager {
        &self.manager
    }

    fn channel(&self, id: &str) -> broadcast::Sender<Frame> {
        self.channels
            .lock()
            .expect("channel table poisoned")
            .entry(id.to_string())
            .or_insert_with(|| broadcast::channel(64).0)
            .clone()
    }

    /// Starts the step timer of an auto-mode session unless it already runs.
    fn start_ticker(self: &Arc<Self>, id: &str) {
        let Ok((Mode::Auto, dwell)) = self.manager.mode(id) else {
            return;
        };
        if !self.ticking.lock().expect("ticker set poisoned").insert(id.to_string()) {
            return;
        }
        let state = self.clone();
        let id = id.to_string();
        let tx = self.channel(&id);
        tokio::spawn(async move {
            loop {
                tokio::time::sleep(Duration::from_millis(dwell)).await;
                match state.manager.tick(&id) {
                    Ok(Some(frame)) => {
                        let done = frame.done;
                        let _ = tx.send(frame);
                        if done {
                            break;
                        }
                    }
                    Ok(None) | Err(_) => break,
                }
            }
            state.ticking.lock().expect("ticker set poisoned").remove(&id);
        });
    }

    /// Handles one client message. The session id is returned alongside so
    /// socket handlers can subscribe to pushed frames.
    pub fn handle(self: &Arc<Self>, msg: ClientMessage) -> (ServerMessage, Option<String>) {
        let result = match msg {
            ClientMessage::Create { scenario } => self.manager.create(scenario),
            ClientMessage::Suggest {
                session,
                action,
                step,
            } => self.manager.suggest(&session, action, step),
            ClientMessage::Reset { session } => self.manager.reset(&session),
            ClientMessage::Get { session } => self.manager.get(&session),
        };
        match result {
            Ok(frame) => {
                let id = frame.session.clone();
                self.start_ticker(&id);
                (ServerMessage::Frame(frame), Some(id))
            }
            Err(e) => (e.into(), None),
        }
    }

    pub fn handle_text(self: &Arc<Self>, text: &str) -> (ServerMessage, Option<String>) {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => (ServerMessage::error("bad_request", e.to_string()), None),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/api/messages", post(post_message))
        .route("/api/sessions/:id", get(get_session))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn status_for(msg: &ServerMessage) -> StatusCode {
    match msg {
        ServerMessage::Frame(_) => StatusCode::OK,
        ServerMessage::Error { code, .. } if code == "not_found" => StatusCode::NOT_FOUND,
        ServerMessage::Error { code, .. } if code == "internal" => StatusCode::INTERNAL_SERVER_ERROR,
        ServerMessage::Error { .. } => StatusCode::BAD_REQUEST,
    }
}

async fn post_message(State(state): State<Arc<AppState>>, body: String) -> Response {
    let (reply, _) = state.handle_text(&body);
    (status_for(&reply), Json(reply)).into_response()
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let reply = match state.manager.get(&id) {
        Ok(frame) => ServerMessage::Frame(frame),
        Err(e) => e.into(),
    };
    (status_for(&reply), Json(reply)).into_response()
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, state))
}

async fn run_socket(socket: WebSocket, state: Arc<AppState>) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<ServerMessage>();
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            let text = serde_json::to_string(&msg).expect("server messages serialize");
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
    });

    let mut subscribed: HashSet<String> = HashSet::new();
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let (reply, session) = state.handle_text(&text);
        if out_tx.send(reply).is_err() {
            break;
        }
        if let Some(id) = session {
            if subscribed.insert(id.clone()) {
                let mut rx = state.channel(&id).subscribe();
                let tx = out_tx.clone();
                tokio::spawn(async move {
                    while let Ok(frame) = rx.recv().await {
                        if tx.send(ServerMessage::Frame(frame)).is_err() {
                            break;
                        }
                    }
                });
            }
        }
    }
    drop(out_tx);
    writer.abort();
}
