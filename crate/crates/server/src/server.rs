//! HTTP front end: `/session` upgrades to a WebSocket session and `/` serves
//! the operator UI bundle.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use assistlab_core::config::LabConfig;
use assistlab_core::seeding::derive_seed;
use assistlab_eval::QuestionnaireRecord;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

use crate::registry::PolicyRegistry;
use crate::session::{Session, SessionOutput};
use crate::ServerError;

const PLACEHOLDER_INDEX: &str = include_str!("../static/index.html");

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tick: Duration,
    pub seed: u64,
    pub record_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { tick: Duration::from_millis(100), seed: 0, record_dir: None, ui_dir: None }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub lab: Arc<LabConfig>,
    pub policies: Arc<PolicyRegistry>,
    pub config: Arc<ServerConfig>,
    sessions: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(lab: Arc<LabConfig>, policies: PolicyRegistry, config: ServerConfig) -> Self {
        Self { lab, policies: Arc::new(policies), config: Arc::new(config), sessions: Arc::new(AtomicU64::new(0)) }
    }
}

pub fn router(state: AppState) -> Router {
    let app = Router::new().route("/session", get(upgrade));
    let app = match &state.config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    app.with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn run_session(socket: WebSocket, state: AppState) {
    let n = state.sessions.fetch_add(1, Ordering::Relaxed);
    let sid = format!("s{n:04}");
    let cfg = &state.config;
    let mut session = Session::new(
        sid.clone(),
        derive_seed(cfg.seed, &[n]),
        cfg.tick.as_millis() as u64,
        Arc::clone(&state.lab),
        Arc::clone(&state.policies),
    );
    tracing::info!(%sid, "session opened");
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            match msg {
                Message::Text(text) => {
                    if tx.send(text.to_string()).is_err() {
                        break;
                    }
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    let mut clock = tokio::time::interval(cfg.tick);
    clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    'ticks: loop {
        clock.tick().await;
        let mut disconnected = false;
        loop {
            match rx.try_recv() {
                Ok(text) => session.enqueue_text(&text),
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => {
                    disconnected = true;
                    break;
                }
            }
        }
        let outbound = match session.tick() {
            Ok(msgs) => msgs,
            Err(ServerError::SessionExpired(_)) => break,
            Err(e) => {
                tracing::error!(%sid, error = %e, "session failed");
                break;
            }
        };
        if let Err(e) = persist(cfg, &sid, session.drain_output()) {
            tracing::error!(%sid, error = %e, "could not write session output");
        }
        for msg in outbound {
            let text = serde_json::to_string(&msg).expect("messages serialize");
            if sink.send(Message::Text(text.into())).await.is_err() {
                break 'ticks;
            }
        }
        if disconnected {
            break;
        }
    }
    reader.abort();
    let _ = sink.close().await;
    tracing::info!(%sid, "session closed");
}

/// Writes finished trials as JSONL records and questionnaires as CSV.
fn persist(cfg: &ServerConfig, sid: &str, out: SessionOutput) -> Result<(), ServerError> {
    let Some(dir) = &cfg.record_dir else { return Ok(()) };
    for r in &out.records {
        let path = dir.join(format!("{sid}-{}.jsonl", r.header.episode));
        let file = std::fs::File::create(&path).map_err(|source| ServerError::Io { path: path.clone(), source })?;
        r.write_jsonl(std::io::BufWriter::new(file))?;
    }
    if !out.questionnaires.is_empty() {
        let path = dir.join(format!("{sid}-questionnaire.csv"));
        let file = std::fs::File::create(&path).map_err(|source| ServerError::Io { path: path.clone(), source })?;
        QuestionnaireRecord::write_csv(&out.questionnaires, file)?;
    }
    Ok(())
}
