use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use mhng_core::color::{patch_file_name, render_patch, PatchStyle};
use mhng_core::engine::GameConfig;
use mhng_core::rng::derive_seed;
use mhng_core::session::{
    create_session, handle_message, now_millis, replay_file, Envelope, EventLog, EventPayload,
    LogOrigin, Recipient, SessionState, WireMessage, SERVER_SENDER,
};
use mhng_core::stimulus::{builtin_stimuli, StimulusSet};
use serde::Deserialize;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

/// Largest accepted raw-TCP frame.
const MAX_FRAME: u32 = 1 << 20;
const PATCH_SIZE: u32 = 128;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, env = "MHNG_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "MHNG_HOST", default_value = "127.0.0.1")]
    host: String,
    /// JSON file listing the sessions to host.
    #[arg(long)]
    session_config: PathBuf,
    /// One `<session>.jsonl` event log per session is kept here.
    #[arg(long, env = "MHNG_LOG_DIR", default_value = "logs")]
    log_dir: PathBuf,
    /// Length-prefixed frames over plain TCP instead of WebSocket.
    #[arg(long)]
    raw_tcp: bool,
}

#[derive(Debug, Deserialize)]
struct SessionsFile {
    sessions: Vec<SessionSpec>,
}

#[derive(Debug, Deserialize)]
struct SessionSpec {
    id: String,
    #[serde(default)]
    config: GameConfig,
    /// Manifest files, relative to the config file; built-in datasets seeded
    /// from the config when empty.
    #[serde(default)]
    manifests: Vec<PathBuf>,
}

type Outbox = mpsc::UnboundedSender<String>;

struct Inbound {
    envelope: Envelope,
    reply: Outbox,
}

#[derive(Clone)]
struct App {
    sessions: Arc<HashMap<String, mpsc::UnboundedSender<Inbound>>>,
    datasets: Arc<HashMap<String, Vec<StimulusSet>>>,
}

pub fn run(args: Args) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve(args))
}

fn load_datasets(spec: &SessionSpec, base: &Path) -> Result<Vec<StimulusSet>> {
    if spec.manifests.is_empty() {
        return spec
            .config
            .datasets
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let kind = id.parse().with_context(|| {
                    format!("session {:?}: no manifest for dataset {id:?}", spec.id)
                })?;
                Ok(builtin_stimuli(
                    kind,
                    spec.config.stimuli_per_dataset,
                    derive_seed(spec.config.seed, i as u64 + 1),
                )?)
            })
            .collect();
    }
    spec.manifests
        .iter()
        .map(|p| {
            let path = base.join(p);
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok(StimulusSet::from_manifest(&text)?)
        })
        .collect()
}

/// Restores a session from its log, or creates it and starts the log.
fn open_session(
    spec: &SessionSpec,
    datasets: Vec<StimulusSet>,
    log_dir: &Path,
) -> Result<(SessionState, EventLog<File>)> {
    let path = log_dir.join(format!("{}.jsonl", spec.id));
    if path.exists() && fs::metadata(&path)?.len() > 0 {
        let replay =
            replay_file(&path).with_context(|| format!("resuming from {}", path.display()))?;
        ensure!(
            replay.origin == LogOrigin::Session,
            "{} is not a session log",
            path.display()
        );
        if replay.state.config != spec.config || replay.state.datasets != datasets {
            log::warn!(
                "session {:?}: the log's configuration differs from the config file; the log wins",
                spec.id
            );
        }
        log::info!(
            "session {:?} resumed at record {} ({:?})",
            spec.id,
            replay.records,
            replay.state.phase
        );
        let file = OpenOptions::new().append(true).open(&path)?;
        return Ok((
            replay.state,
            EventLog::resume(file, &spec.id, replay.records as u64),
        ));
    }
    let state = create_session(&spec.id, spec.config.clone(), datasets.clone())?;
    let mut log = EventLog::new(File::create(&path)?, &spec.id);
    let created = EventPayload::Created {
        config: spec.config.clone(),
        datasets,
        origin: LogOrigin::Session,
    };
    log.append(created, now_millis())?;
    Ok((state, log))
}

async fn serve(args: Args) -> Result<()> {
    let text = fs::read_to_string(&args.session_config)
        .with_context(|| format!("reading {}", args.session_config.display()))?;
    let file: SessionsFile = serde_json::from_str(&text).context("parsing the session config")?;
    ensure!(
        !file.sessions.is_empty(),
        "the session config lists no sessions"
    );
    let base = args
        .session_config
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    fs::create_dir_all(&args.log_dir)
        .with_context(|| format!("creating {}", args.log_dir.display()))?;

    let mut sessions = HashMap::new();
    let mut datasets = HashMap::new();
    for spec in &file.sessions {
        if sessions.contains_key(&spec.id) {
            bail!("session {:?} is listed twice", spec.id);
        }
        let (state, log) = open_session(spec, load_datasets(spec, &base)?, &args.log_dir)?;
        datasets.insert(spec.id.clone(), state.datasets.clone());
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(session_actor(state, log, rx));
        sessions.insert(spec.id.clone(), tx);
    }
    let app = App {
        sessions: Arc::new(sessions),
        datasets: Arc::new(datasets),
    };

    let listener = TcpListener::bind((args.host.as_str(), args.port)).await?;
    let addr = listener.local_addr()?;
    println!(
        "listening on {addr} ({})",
        if args.raw_tcp {
            "raw tcp"
        } else {
            "websocket at /ws"
        }
    );
    std::io::stdout().flush()?;

    if args.raw_tcp {
        loop {
            let (stream, peer) = listener.accept().await?;
            log::debug!("tcp connection from {peer}");
            tokio::spawn(handle_tcp(stream, app.clone()));
        }
    }
    let router = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/images/{session}/{file}", get(image))
        .with_state(app);
    axum::serve(listener, router).await?;
    Ok(())
}

/// Single writer for one session: applies frames in arrival order, persists
/// the resulting events, then fans out the replies.
async fn session_actor(
    mut state: SessionState,
    mut log: EventLog<File>,
    mut inbox: mpsc::UnboundedReceiver<Inbound>,
) {
    let mut bound: HashMap<String, Outbox> = HashMap::new();
    let mut next_seq: HashMap<String, u64> = HashMap::new();
    while let Some(Inbound { envelope, reply }) = inbox.recv().await {
        let mut t = handle_message(&state, &envelope);
        if t.rejected.is_none() {
            let persisted = t
                .events
                .drain(..)
                .try_for_each(|e| log.append(e, now_millis()).map(drop));
            if let Err(e) = persisted {
                log::error!("session {}: could not persist event: {e}", state.session_id);
                let message = WireMessage::ProtocolError {
                    sequence: envelope.sequence,
                    message: "server could not persist the frame".into(),
                };
                send(
                    &reply,
                    &state.session_id,
                    &mut next_seq,
                    &envelope.sender,
                    message,
                );
                continue;
            }
            state = t.state;
            if matches!(envelope.message, WireMessage::Join { .. }) {
                bound.insert(envelope.sender.clone(), reply.clone());
            }
        } else {
            log::info!(
                "session {}: refused {} from {}: {}",
                state.session_id,
                envelope.message.kind(),
                envelope.sender,
                t.rejected.as_deref().unwrap_or("")
            );
        }
        for out in t.outbound {
            let targets: Vec<String> = match out.to {
                Recipient::All => state.participants.iter().map(|p| p.id.clone()).collect(),
                Recipient::Participant(id) => vec![id],
            };
            for id in targets {
                let tx = if id == envelope.sender {
                    Some(&reply)
                } else {
                    bound.get(&id)
                };
                if let Some(tx) = tx {
                    send(
                        tx,
                        &state.session_id,
                        &mut next_seq,
                        &id,
                        out.message.clone(),
                    );
                }
            }
        }
    }
}

fn send(
    tx: &Outbox,
    session_id: &str,
    next_seq: &mut HashMap<String, u64>,
    to: &str,
    message: WireMessage,
) {
    let seq = next_seq.entry(to.to_string()).or_insert(0);
    let env = Envelope::new(session_id, *seq, SERVER_SENDER, message);
    *seq += 1;
    match env.to_json() {
        Ok(text) => {
            let _ = tx.send(text);
        }
        Err(e) => log::error!("encoding a frame for {to}: {e}"),
    }
}

/// Routes one client frame to its session.
fn dispatch(app: &App, text: &str, reply: &Outbox) {
    let error = |session_id: &str, message: String| {
        let env = Envelope::new(
            session_id,
            0,
            SERVER_SENDER,
            WireMessage::ProtocolError {
                sequence: 0,
                message,
            },
        );
        if let Ok(text) = env.to_json() {
            let _ = reply.send(text);
        }
    };
    let envelope = match Envelope::from_json(text) {
        Ok(env) => env,
        Err(e) => return error("", format!("malformed frame: {e}")),
    };
    match app.sessions.get(&envelope.session_id) {
        Some(tx) => {
            let session_id = envelope.session_id.clone();
            if tx
                .send(Inbound {
                    envelope,
                    reply: reply.clone(),
                })
                .is_err()
            {
                error(&session_id, "session is not running".into());
            }
        }
        None => error(
            &envelope.session_id,
            format!("unknown session {:?}", envelope.session_id),
        ),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<App>) -> Response {
    ws.on_upgrade(move |socket| handle_ws(socket, app))
}

async fn handle_ws(socket: WebSocket, app: App) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => dispatch(&app, text.as_str(), &tx),
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
}

async fn handle_tcp(stream: TcpStream, app: App) {
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            let bytes = text.as_bytes();
            if wr.write_u32(bytes.len() as u32).await.is_err() || wr.write_all(bytes).await.is_err()
            {
                break;
            }
        }
    });
    while let Ok(len) = rd.read_u32().await {
        if len > MAX_FRAME {
            log::warn!("closing tcp connection: {len}-byte frame exceeds the limit");
            break;
        }
        let mut buf = vec![0u8; len as usize];
        if rd.read_exact(&mut buf).await.is_err() {
            break;
        }
        match String::from_utf8(buf) {
            Ok(text) => dispatch(&app, &text, &tx),
            Err(_) => dispatch(&app, "", &tx),
        }
    }
    // let queued replies drain before the socket closes
    drop(tx);
    let _ = writer.await;
}

async fn image(
    State(app): State<App>,
    UrlPath((session, file)): UrlPath<(String, String)>,
) -> Response {
    let Some(sets) = app.datasets.get(&session) else {
        return (StatusCode::NOT_FOUND, "unknown session").into_response();
    };
    let found = sets
        .iter()
        .flat_map(|set| {
            set.stimuli
                .iter()
                .enumerate()
                .map(move |(i, s)| (patch_file_name(&set.id, i), s.point()))
        })
        .find(|(name, _)| *name == file);
    let Some((_, point)) = found else {
        return (StatusCode::NOT_FOUND, "unknown image").into_response();
    };
    match render_patch(point, PATCH_SIZE, &PatchStyle::default()).and_then(|r| r.to_png()) {
        Ok(png) => ([(header::CONTENT_TYPE, "image/png")], png).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}
