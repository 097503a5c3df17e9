//! Live session service.
//!
//! Three kinds of activity run side by side: the 100 Hz loop on its own OS
//! thread, the telemetry fan-out to socket clients, and control handling.
//! Every control request goes through one task that owns the session state,
//! so requests are applied in arrival order.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc as std_mpsc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, oneshot};
use tremorlab_core::assist::{LoopInput, LoopStats, TickClock, TICK_PERIOD_S};
use tremorlab_core::session::{synchronize, AssistSnapshot, Condition, FrameBuilder, SessionState};
use tremorlab_core::signalgen::{generate_cohort, SubjectProfile, TaskKind, TaskSpec};

use crate::clock::MonotonicClock;
use crate::commands::{controller_for, finalize, ASSIST_COMMANDS_JSONL, LOOP_STATS_JSON};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{self, write_json, write_jsonl};
use crate::telemetry::{MessageKind, SafetyEvent, SafetyEventKind, TelemetryHub};

const REPLY_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartRequest {
    pub subject_id: String,
    pub task: TaskKind,
    /// Falls back to the condition selected while idle.
    #[serde(default)]
    pub condition: Option<Condition>,
    #[serde(default)]
    pub assist_level: Option<f64>,
    /// From this session time on the joint reads as blocked while full
    /// torque is requested.
    #[serde(default)]
    pub stall_at_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRequest {
    pub condition: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssistLevelRequest {
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSession {
    pub session_key: String,
    pub subject_id: String,
    pub task: TaskKind,
    pub condition: Condition,
    pub trial: u32,
    pub assist_level: f64,
}

/// Reply to every control request and payload of `session_state` messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub state: SessionState,
    pub selected_condition: Condition,
    pub session: Option<LiveSession>,
    /// Directory of the most recently persisted session.
    pub last_persisted: Option<PathBuf>,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ApiErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        Self {
            status,
            body: ApiErrorBody {
                code: code.to_string(),
                message: message.to_string(),
            },
        }
    }

    fn conflict(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    fn invalid(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

enum Control {
    Start(StartRequest),
    Stop,
    SetCondition(Condition),
    SetAssistLevel(f64),
    Reset,
    Status,
    Finished(Finished),
}

struct Request {
    control: Control,
    reply: Option<oneshot::Sender<Result<SessionStatus, ApiError>>>,
}

enum LoopMsg {
    SetLevel(f64),
    Reset,
    Stop(oneshot::Sender<()>),
}

struct Finished {
    persisted: Result<PathBuf, String>,
}

struct Running {
    info: LiveSession,
    tx: std_mpsc::Sender<LoopMsg>,
}

struct Owner {
    cfg: RunConfig,
    cohort: Vec<SubjectProfile>,
    hub: TelemetryHub,
    self_tx: mpsc::Sender<Request>,
    state: SessionState,
    selected: Condition,
    running: Option<Running>,
    last_session: Option<LiveSession>,
    persisting: bool,
    last_persisted: Option<PathBuf>,
    last_error: Option<String>,
}

impl Owner {
    fn status(&self) -> SessionStatus {
        SessionStatus {
            state: self.state,
            selected_condition: self.selected,
            session: self.running.as_ref().map(|r| r.info.clone()).or_else(|| self.last_session.clone()),
            last_persisted: self.last_persisted.clone(),
            last_error: self.last_error.clone(),
        }
    }

    fn announce(&self) {
        self.hub.publish(MessageKind::SessionState, &self.status());
    }

    fn next_trial(&self, subject: &str, task: TaskKind, c: Condition) -> u32 {
        let dir = self.cfg.output_root.join(store::SESSIONS_DIR);
        (0..)
            .find(|t| !dir.join(format!("{subject}_{}_{}_t{t}", task.as_str(), c.as_str())).exists())
            .unwrap_or(0)
    }

    async fn handle(&mut self, control: Control) -> Result<SessionStatus, ApiError> {
        match control {
            Control::Status => {}
            Control::Start(req) => self.start(req)?,
            Control::Stop => {
                let Some(run) = self.running.take() else {
                    return Err(ApiError::conflict("not_running", "no session is running"));
                };
                let (ack_tx, ack_rx) = oneshot::channel();
                if run.tx.send(LoopMsg::Stop(ack_tx)).is_ok() {
                    let _ = tokio::time::timeout(REPLY_TIMEOUT, ack_rx).await;
                }
                self.last_session = Some(run.info);
                self.state = SessionState::Stopped;
                self.announce();
            }
            Control::SetCondition(c) => {
                if self.running.is_some() {
                    return Err(ApiError::conflict(
                        "condition_locked",
                        "the condition is fixed for the whole session; stop it first",
                    ));
                }
                self.selected = c;
                self.announce();
            }
            Control::SetAssistLevel(level) => {
                let Some(run) = self.running.as_mut() else {
                    return Err(ApiError::conflict("not_running", "no session is running"));
                };
                if run.info.condition == Condition::Baseline {
                    return Err(ApiError::conflict("assist_inactive", "assist is inactive during baseline"));
                }
                if !(0.0..=1.0).contains(&level) {
                    return Err(ApiError::invalid("invalid_level", "assist level must lie in [0, 1]"));
                }
                run.info.assist_level = level;
                let _ = run.tx.send(LoopMsg::SetLevel(level));
                self.announce();
            }
            Control::Reset => {
                let Some(run) = self.running.as_ref() else {
                    return Err(ApiError::conflict("not_running", "no session is running"));
                };
                let _ = run.tx.send(LoopMsg::Reset);
            }
            Control::Finished(f) => {
                self.persisting = false;
                match f.persisted {
                    Ok(p) => {
                        self.last_persisted = Some(p);
                        self.last_error = None;
                    }
                    Err(e) => self.last_error = Some(e),
                }
                if let Some(run) = self.running.take() {
                    self.last_session = Some(run.info);
                }
                self.state = SessionState::Stopped;
                self.announce();
            }
        }
        Ok(self.status())
    }

    fn start(&mut self, req: StartRequest) -> Result<(), ApiError> {
        if self.running.is_some() {
            return Err(ApiError::conflict("already_running", "a session is already running"));
        }
        if self.persisting {
            return Err(ApiError::conflict("busy", "the previous session is still being saved"));
        }
        let profile = self
            .cohort
            .iter()
            .find(|p| p.subject_id == req.subject_id)
            .cloned()
            .ok_or_else(|| ApiError::invalid("unknown_subject", format!("no subject `{}` in the cohort", req.subject_id)))?;
        let condition = req.condition.unwrap_or(self.selected);
        let level = match (condition, req.assist_level) {
            (Condition::Baseline, Some(l)) if l != 0.0 => {
                return Err(ApiError::conflict("assist_inactive", "assist is inactive during baseline"))
            }
            (Condition::Baseline, _) => 0.0,
            (Condition::Assisted, Some(l)) if !(0.0..=1.0).contains(&l) => {
                return Err(ApiError::invalid("invalid_level", "assist level must lie in [0, 1]"))
            }
            (Condition::Assisted, l) => l.unwrap_or(self.cfg.assist.level),
        };
        if req.stall_at_s.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
            return Err(ApiError::invalid("invalid_stall", "stall_at_s must be a nonnegative time"));
        }
        let trial = self.next_trial(&profile.subject_id, req.task, condition);
        let info = LiveSession {
            session_key: format!("{}_{}_{}_t{trial}", profile.subject_id, req.task.as_str(), condition.as_str()),
            subject_id: profile.subject_id.clone(),
            task: req.task,
            condition,
            trial,
            assist_level: level,
        };
        let (tx, rx) = std_mpsc::channel();
        let job = LiveJob {
            cfg: self.cfg.clone(),
            profile,
            info: info.clone(),
            stall_at_s: req.stall_at_s,
            hub: self.hub.clone(),
            owner: self.self_tx.clone(),
            rx,
        };
        std::thread::Builder::new()
            .name("assist-loop".into())
            .spawn(move || job.run())
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "spawn_failed", e))?;
        self.running = Some(Running { info, tx });
        self.persisting = true;
        self.selected = condition;
        self.state = SessionState::Running;
        self.announce();
        Ok(())
    }
}

struct LiveJob {
    cfg: RunConfig,
    profile: SubjectProfile,
    info: LiveSession,
    stall_at_s: Option<f64>,
    hub: TelemetryHub,
    owner: mpsc::Sender<Request>,
    rx: std_mpsc::Receiver<LoopMsg>,
}

impl LiveJob {
    fn run(self) {
        let persisted = self.run_inner().map_err(|e| e.to_string());
        let _ = self.owner.blocking_send(Request {
            control: Control::Finished(Finished { persisted }),
            reply: None,
        });
    }

    fn run_inner(&self) -> CliResult<PathBuf> {
        let cfg = &self.cfg;
        let task = TaskSpec {
            duration_s: cfg.task_duration_s,
            ..TaskSpec::standard(self.info.task)
        };
        let mut record = tremorlab_core::signalgen::generate_session_with(
            &self.profile,
            &task,
            self.info.condition,
            &tremorlab_core::session::ChannelConfig::default_set(),
            &tremorlab_core::signalgen::SignalModel::default(),
            self.info.trial,
        )?;
        let view = synchronize(&record.channels)?;
        let input = LoopInput::from_view(&view, cfg.assist.lookahead_s)?;
        let mut controller = controller_for(cfg, &record, self.info.assist_level)?;
        let mut clock = MonotonicClock::paced(cfg.serve.time_scale);
        let mut frames = FrameBuilder::new(cfg.serve.ui_rate_hz)?;
        let ticks_per_frame = ((1.0 / (cfg.serve.ui_rate_hz * TICK_PERIOD_S)).round() as u64).max(1);
        let total = (record.duration_s() / TICK_PERIOD_S + 1e-9).floor() as u64;

        let mut commands = Vec::with_capacity(total as usize);
        let mut stats = LoopStats {
            tick_period_s: TICK_PERIOD_S,
            ticks: 0,
            per_tick_latency_s: Vec::with_capacity(total as usize),
            missed_deadlines: 0,
            underruns: 0,
            median_latency_s: 0.0,
            p95_latency_s: 0.0,
        };
        let mut engaged = true;
        let mut stop_ack = None;
        for k in 0..total {
            while let Ok(msg) = self.rx.try_recv() {
                match msg {
                    LoopMsg::SetLevel(l) => controller.assist_level = l,
                    LoopMsg::Reset => {
                        controller.reset_safety();
                        engaged = true;
                        self.hub.publish(
                            MessageKind::SafetyEvent,
                            &SafetyEvent {
                                event: SafetyEventKind::Reset,
                                tick_index: k,
                                t_s: k as f64 * TICK_PERIOD_S,
                                flags: Vec::new(),
                                engaged: true,
                            },
                        );
                    }
                    LoopMsg::Stop(ack) => stop_ack = Some(ack),
                }
            }
            if stop_ack.is_some() {
                break;
            }
            let on_time = clock.wait_for_tick(k, TICK_PERIOD_S);
            let t = k as f64 * TICK_PERIOD_S;
            let mut tick = input.tick(k);
            if self.stall_at_s.is_some_and(|s| t >= s) {
                tick.velocity_dps = Some(0.0);
                tick.scripted_request = Some(cfg.envelope.torque_max);
            }
            let t0 = clock.now_s();
            let (cmd, underrun) = controller.step(&tick);
            let latency = clock.now_s() - t0;
            stats.ticks += 1;
            stats.per_tick_latency_s.push(latency);
            stats.underruns += underrun as u64;
            if !on_time || underrun || latency > TICK_PERIOD_S {
                stats.missed_deadlines += 1;
            }
            if engaged && !cmd.engaged {
                self.hub.publish(
                    MessageKind::SafetyEvent,
                    &SafetyEvent {
                        event: SafetyEventKind::Disengaged,
                        tick_index: cmd.tick_index,
                        t_s: t,
                        flags: cmd.clamped_flags.clone(),
                        engaged: false,
                    },
                );
            }
            engaged = cmd.engaged;
            if (k + 1) % ticks_per_frame == 0 {
                frames.features = controller.latest_features().copied();
                frames.assist = Some(AssistSnapshot::from_command(&cmd, controller.need_score(), controller.assist_level));
                frames.safety_flags = cmd.clamped_flags.clone();
                let frame = frames.next_frame(&view);
                self.hub.publish(MessageKind::Frame, &frame);
            }
            commands.push(cmd);
        }
        if let Some(ack) = stop_ack {
            let _ = ack.send(());
        }

        let elapsed = stats.ticks as f64 * TICK_PERIOD_S;
        if stats.ticks < total {
            for stream in record.channels.values_mut() {
                stream.packets.retain(|p| p.hub_timestamp_s < elapsed);
            }
            // Rates are per recorded minute, so the record covers what ran.
            record.task.duration_s = elapsed;
        }
        finalize(&mut record, cfg.mad_threshold);
        store::persist(&record, &cfg.output_root)?;
        let dir = store::session_dir(&cfg.output_root, &record.session_key());
        write_jsonl(&dir.join(ASSIST_COMMANDS_JSONL), &commands)?;
        write_json(&dir.join(LOOP_STATS_JSON), &stats.finish())?;
        Ok(dir)
    }
}

#[derive(Clone)]
struct AppState {
    tx: mpsc::Sender<Request>,
    hub: TelemetryHub,
}

impl AppState {
    async fn call(&self, control: Control) -> Result<Json<SessionStatus>, ApiError> {
        let (reply, rx) = oneshot::channel();
        let unavailable = || ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "unavailable", "service is shutting down");
        self.tx
            .send(Request {
                control,
                reply: Some(reply),
            })
            .await
            .map_err(|_| unavailable())?;
        match tokio::time::timeout(REPLY_TIMEOUT, rx).await {
            Ok(Ok(r)) => r.map(Json),
            _ => Err(unavailable()),
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid("malformed_request", e))
}

async fn status(State(s): State<AppState>) -> Result<Json<SessionStatus>, ApiError> {
    s.call(Control::Status).await
}

async fn start(State(s): State<AppState>, body: Bytes) -> Result<Json<SessionStatus>, ApiError> {
    s.call(Control::Start(parse(&body)?)).await
}

async fn stop(State(s): State<AppState>) -> Result<Json<SessionStatus>, ApiError> {
    s.call(Control::Stop).await
}

async fn set_condition(State(s): State<AppState>, body: Bytes) -> Result<Json<SessionStatus>, ApiError> {
    let req: ConditionRequest = parse(&body)?;
    s.call(Control::SetCondition(req.condition)).await
}

async fn set_assist_level(State(s): State<AppState>, body: Bytes) -> Result<Json<SessionStatus>, ApiError> {
    let req: AssistLevelRequest = parse(&body)?;
    s.call(Control::SetAssistLevel(req.level)).await
}

async fn reset(State(s): State<AppState>) -> Result<Json<SessionStatus>, ApiError> {
    s.call(Control::Reset).await
}

async fn telemetry(State(s): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| client(socket, s))
}

/// Forwards hub messages to one client. Messages the client was too slow
/// for are skipped; inbound text is ignored.
async fn client(mut socket: WebSocket, s: AppState) {
    let mut rx = s.hub.subscribe();
    if let Ok(Json(st)) = s.call(Control::Status).await {
        s.hub.publish(MessageKind::SessionState, &st);
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            inbound = socket.recv() => match inbound {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

fn router(state_tx: mpsc::Sender<Request>, hub: TelemetryHub) -> Router {
    Router::new()
        .route("/api/session", get(status))
        .route("/api/session/start", post(start))
        .route("/api/session/stop", post(stop))
        .route("/api/session/condition", post(set_condition))
        .route("/api/session/assist-level", post(set_assist_level))
        .route("/api/session/reset", post(reset))
        .route("/api/telemetry", get(telemetry))
        .with_state(AppState { tx: state_tx, hub })
}

/// Bound service: the listener is already open when this returns.
pub struct Service {
    pub addr: SocketAddr,
    listener: tokio::net::TcpListener,
    app: Router,
}

impl Service {
    pub async fn bind(cfg: RunConfig) -> CliResult<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.output_root).map_err(|e| CliError::io(&cfg.output_root, e))?;
        let cohort = generate_cohort(cfg.cohort_size.max(2), &cfg.calibration, cfg.seed)?;
        let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(Path::new(&addr), e))?;
        let local = listener.local_addr().map_err(|e| CliError::io(Path::new(&addr), e))?;

        let hub = TelemetryHub::new(cfg.serve.client_queue);
        let (tx, mut rx) = mpsc::channel::<Request>(64);
        let mut owner = Owner {
            cfg,
            cohort,
            hub: hub.clone(),
            self_tx: tx.clone(),
            state: SessionState::Idle,
            selected: Condition::Baseline,
            running: None,
            last_session: None,
            persisting: false,
            last_persisted: None,
            last_error: None,
        };
        tokio::spawn(async move {
            while let Some(req) = rx.recv().await {
                let result = owner.handle(req.control).await;
                if let Some(reply) = req.reply {
                    let _ = reply.send(result);
                }
            }
        });
        Ok(Self {
            addr: local,
            listener,
            app: router(tx, hub),
        })
    }

    pub async fn run(self) -> CliResult<()> {
        let addr = self.addr;
        axum::serve(self.listener, self.app)
            .await
            .map_err(|e| CliError::io(Path::new(&addr.to_string()), e))
    }

    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> CliResult<()> {
        let addr = self.addr;
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(|e| CliError::io(Path::new(&addr.to_string()), e))
    }
}

/// Serves until interrupted.
pub async fn cmd_serve(cfg: RunConfig) -> CliResult<()> {
    let service = Service::bind(cfg).await?;
    eprintln!("listening on http://{}", service.addr);
    service
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
