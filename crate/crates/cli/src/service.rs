//! Ground-station service. Exposes the station's views to the operator console:
//!
//! - `GET /hk` latest housekeeping per device
//! - `GET /archive?from=N&limit=M` archive index rows
//! - `GET /cmdlog` operator command log
//! - `GET /raw/{row}` hex dump of one archived packet
//! - `POST /cmd {mid, function_code, args?}` build, log and uplink a command
//! - `GET /alerts`, `GET /status`
//! - `GET /stream` WebSocket of [`StreamEvent`]s as JSON text frames

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{SyncSender, TrySendError};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use sbsim_core::defenses::Alert;
use sbsim_core::ground::{
    hex_dump, CommandLogRecord, FormatViolation, GroundError, GroundStation, HkSnapshot, IndexRow, ParseOutcome,
    PreparedCommand,
};
use sbsim_core::spacepacket::MessageId;

const EVENT_BUFFER: usize = 1024;
const DEFAULT_ARCHIVE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub scenario: String,
    pub tick: u64,
    pub duration_ticks: u64,
    pub running: bool,
}

/// Pushed to every `/stream` subscriber as it happens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Telemetry { row: IndexRow },
    Violation { violation: FormatViolation },
    Command { record: CommandLogRecord },
    Alert { alert: Alert },
    Status { status: Status },
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no uplink attached")]
    NoUplink,
    #[error("uplink queue full")]
    UplinkFull,
    #[error("uplink closed")]
    UplinkClosed,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let code = match &self {
            ServiceError::Ground(GroundError::RowOutOfRange { .. }) => StatusCode::NOT_FOUND,
            ServiceError::Ground(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::SERVICE_UNAVAILABLE,
        };
        (code, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

struct Station {
    ground: GroundStation,
    /// Tick of the display cycle currently open.
    cycle: u64,
}

pub struct Service {
    station: Mutex<Station>,
    clock: AtomicU64,
    alerts: Mutex<Vec<Alert>>,
    status: Mutex<Status>,
    uplink: Option<SyncSender<Vec<u8>>>,
    events: broadcast::Sender<StreamEvent>,
}

impl Service {
    pub fn new(ground: GroundStation, uplink: Option<SyncSender<Vec<u8>>>, status: Status) -> Arc<Self> {
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        Arc::new(Self {
            station: Mutex::new(Station {
                ground,
                cycle: status.tick,
            }),
            clock: AtomicU64::new(status.tick),
            alerts: Mutex::new(Vec::new()),
            status: Mutex::new(status),
            uplink,
            events,
        })
    }

    fn lock(&self) -> MutexGuard<'_, Station> {
        self.station.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Read access to the station, for snapshots.
    pub fn with_ground<T>(&self, f: impl FnOnce(&GroundStation) -> T) -> T {
        f(&self.lock().ground)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.events.subscribe()
    }

    fn emit(&self, event: StreamEvent) {
        // no subscribers is fine
        let _ = self.events.send(event);
    }

    pub fn tick(&self) -> u64 {
        self.clock.load(Ordering::SeqCst)
    }

    /// Advances the station clock. Housekeeping touched in earlier cycles is committed to
    /// the history when the next packet or command arrives.
    pub fn set_tick(&self, tick: u64) {
        self.clock.store(tick, Ordering::SeqCst);
        self.status.lock().unwrap_or_else(|e| e.into_inner()).tick = tick;
    }

    fn roll(&self, st: &mut Station) {
        let now = self.tick();
        if now > st.cycle {
            st.ground.end_tick();
            st.cycle = now;
        }
    }

    /// Closes the open display cycle.
    pub fn flush(&self) {
        self.lock().ground.end_tick();
    }

    /// Parses one received frame body at the current clock.
    pub fn ingest(&self, body: &[u8]) -> ParseOutcome {
        let outcome = {
            let mut st = self.lock();
            self.roll(&mut st);
            let tick = st.cycle;
            st.ground.parse_telemetry(tick, body)
        };
        match &outcome {
            ParseOutcome::Archived(row) => self.emit(StreamEvent::Telemetry { row: row.clone() }),
            ParseOutcome::Violation(_) => {
                if let Some(v) = self.with_ground(|g| g.violations().last().cloned()) {
                    self.emit(StreamEvent::Violation { violation: v });
                }
            }
            ParseOutcome::Unmapped(_) => {}
        }
        outcome
    }

    fn uplink(
        &self,
        prepare: impl FnOnce(&GroundStation, u64) -> Result<PreparedCommand, GroundError>,
    ) -> Result<CommandLogRecord, ServiceError> {
        let tx = self.uplink.as_ref().ok_or(ServiceError::NoUplink)?;
        let record = {
            let mut st = self.lock();
            self.roll(&mut st);
            let prepared = prepare(&st.ground, st.cycle)?;
            // Only commands that actually reach the uplink queue are logged.
            tx.try_send(prepared.bytes.clone()).map_err(|e| match e {
                TrySendError::Full(_) => ServiceError::UplinkFull,
                TrySendError::Disconnected(_) => ServiceError::UplinkClosed,
            })?;
            let record = prepared.record.clone();
            st.ground.commit(prepared);
            record
        };
        self.emit(StreamEvent::Command { record: record.clone() });
        Ok(record)
    }

    pub fn command(&self, mid: MessageId, function_code: u8, args: &[u8]) -> Result<CommandLogRecord, ServiceError> {
        self.uplink(|g, tick| g.prepare_command(tick, mid, function_code, args))
    }

    pub fn command_named(&self, name: &str, args: &[u8]) -> Result<CommandLogRecord, ServiceError> {
        self.uplink(|g, tick| g.prepare_named(tick, name, args))
    }

    pub fn push_alert(&self, alert: Alert) {
        self.alerts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(alert.clone());
        self.emit(StreamEvent::Alert { alert });
    }

    pub fn alerts(&self) -> Vec<Alert> {
        self.alerts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn status(&self) -> Status {
        self.status.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn set_running(&self, running: bool) {
        let status = {
            let mut s = self.status.lock().unwrap_or_else(|e| e.into_inner());
            s.running = running;
            s.clone()
        };
        self.emit(StreamEvent::Status { status });
    }
}

#[derive(Debug, Deserialize)]
pub struct ArchiveQuery {
    #[serde(default)]
    pub from: usize,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandRequest {
    pub mid: MessageId,
    pub function_code: u8,
    #[serde(default)]
    pub args: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RawView {
    pub row: usize,
    pub mid: MessageId,
    pub name: String,
    pub dump: String,
}

type Shared = State<Arc<Service>>;

async fn hk(State(s): Shared) -> Json<Vec<HkSnapshot>> {
    Json(s.with_ground(|g| g.hk_view().values().cloned().collect()))
}

async fn archive(State(s): Shared, Query(q): Query<ArchiveQuery>) -> Json<Vec<IndexRow>> {
    let limit = q.limit.unwrap_or(DEFAULT_ARCHIVE_LIMIT);
    Json(s.with_ground(|g| g.index().iter().skip(q.from).take(limit).cloned().collect()))
}

async fn cmdlog(State(s): Shared) -> Json<Vec<CommandLogRecord>> {
    Json(s.with_ground(|g| g.cmdlog().to_vec()))
}

async fn raw(State(s): Shared, Path(row): Path<usize>) -> Result<Json<RawView>, ServiceError> {
    s.with_ground(|g| {
        let bytes = g.raw_bytes(row)?;
        let r = &g.index()[row];
        Ok(Json(RawView {
            row,
            mid: r.mid,
            name: r.name.clone(),
            dump: hex_dump(bytes),
        }))
    })
}

async fn cmd(State(s): Shared, Json(req): Json<CommandRequest>) -> Result<Json<CommandLogRecord>, ServiceError> {
    s.command(req.mid, req.function_code, &req.args).map(Json)
}

async fn alerts(State(s): Shared) -> Json<Vec<Alert>> {
    Json(s.alerts())
}

async fn status(State(s): Shared) -> Json<Status> {
    Json(s.status())
}

async fn stream(State(s): Shared, ws: WebSocketUpgrade) -> Response {
    let rx = s.subscribe();
    ws.on_upgrade(move |socket| forward(socket, rx))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<StreamEvent>) {
    loop {
        let event = match rx.recv().await {
            Ok(e) => e,
            // A slow client misses events rather than stalling the station.
            Err(broadcast::error::RecvError::Lagged(_)) => continue,
            Err(broadcast::error::RecvError::Closed) => break,
        };
        let text = serde_json::to_string(&event).expect("events serialize");
        if socket.send(Message::Text(text)).await.is_err() {
            break;
        }
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/hk", get(hk))
        .route("/archive", get(archive))
        .route("/cmdlog", get(cmdlog))
        .route("/raw/:row", get(raw))
        .route("/cmd", post(cmd))
        .route("/alerts", get(alerts))
        .route("/status", get(status))
        .route("/stream", get(stream))
        .with_state(service)
}
