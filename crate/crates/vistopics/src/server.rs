//! HTTP service that hands validation items to coders and records their
//! answers.

use std::collections::{HashMap, HashSet};
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use vistopics_core::validation::{TaskKind, ValidationItem};

use crate::error::Result;
use crate::validate::{read_responses, ItemsFile, ResponseLine, ResponseLog};

const BUILTIN_UI: &str = include_str!("../assets/coder.html");

/// What a coder's browser receives: display data only, never the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPayload {
    pub item_id: u32,
    pub kind: TaskKind,
    pub images: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    /// 1-based position of this item in the task.
    pub position: usize,
    pub total: usize,
}

/// `frames/<video>/<file>` becomes `/api/frames/<video>/<file>`.
pub fn frame_url(label: &str) -> String {
    format!("/api/{label}")
}

impl ItemPayload {
    pub fn new(item: &ValidationItem, position: usize, total: usize) -> Self {
        Self {
            item_id: item.item_id,
            kind: item.kind,
            images: item.images.iter().map(|l| frame_url(l)).collect(),
            rows: (!item.rows.is_empty())
                .then(|| item.rows.iter().map(|r| r.iter().map(|l| frame_url(l)).collect()).collect()),
            probe: item.probe.as_deref().map(frame_url),
            position,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub coder: String,
    pub item_id: u32,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub coder: String,
    pub tasks: HashMap<TaskKind, TaskProgress>,
}

struct Recorder {
    log: ResponseLog,
    answered: HashSet<(String, u32)>,
}

pub struct AppState {
    items: HashMap<TaskKind, Vec<ValidationItem>>,
    run_dir: PathBuf,
    ui_dir: Option<PathBuf>,
    recorder: Mutex<Recorder>,
}

impl AppState {
    /// Items come in their stored order, which every coder sees. Answers
    /// already in `responses` count as given.
    pub fn new(items: &ItemsFile, run_dir: PathBuf, responses: &FsPath, ui_dir: Option<PathBuf>) -> Result<Self> {
        let mut by_kind: HashMap<TaskKind, Vec<ValidationItem>> = HashMap::new();
        for item in &items.items {
            by_kind.entry(item.kind).or_default().push(item.clone());
        }
        let answered = read_responses(responses)?
            .into_iter()
            .map(|r| (r.coder, r.item_id))
            .collect();
        Ok(Self {
            items: by_kind,
            run_dir,
            ui_dir,
            recorder: Mutex::new(Recorder {
                log: ResponseLog::open(responses)?,
                answered,
            }),
        })
    }

    fn answered(&self, coder: &str, kind: TaskKind) -> usize {
        let rec = self.recorder.lock().expect("recorder lock");
        self.items
            .get(&kind)
            .map(|v| v.iter().filter(|i| rec.answered.contains(&(coder.to_string(), i.item_id))).count())
            .unwrap_or(0)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/tasks/{kind}/next", get(next_item))
        .route("/api/tasks/{kind}/respond", post(respond))
        .route("/api/progress", get(progress))
        .route("/api/frames/{video_id}/{file}", get(frame))
        .fallback(get(static_asset))
        .with_state(state)
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: Arc<AppState>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("validation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

#[allow(clippy::result_large_err)]
fn parse_kind(kind: &str) -> std::result::Result<TaskKind, Response> {
    kind.parse()
        .map_err(|_| error(StatusCode::NOT_FOUND, format!("unknown task kind {kind:?}")))
}

#[derive(Deserialize)]
struct CoderQuery {
    coder: Option<String>,
}

#[allow(clippy::result_large_err)]
fn coder_of(q: CoderQuery) -> std::result::Result<String, Response> {
    match q.coder.map(|c| c.trim().to_string()) {
        Some(c) if !c.is_empty() => Ok(c),
        _ => Err(error(StatusCode::BAD_REQUEST, "missing ?coder=<id>")),
    }
}

async fn next_item(
    State(state): State<Arc<AppState>>,
    Path(kind): Path<String>,
    Query(q): Query<CoderQuery>,
) -> Response {
    let kind = match parse_kind(&kind) {
        Ok(k) => k,
        Err(r) => return r,
    };
    let coder = match coder_of(q) {
        Ok(c) => c,
        Err(r) => return r,
    };
    let items = state.items.get(&kind).map(Vec::as_slice).unwrap_or(&[]);
    let rec = state.recorder.lock().expect("recorder lock");
    match items
        .iter()
        .enumerate()
        .find(|(_, i)| !rec.answered.contains(&(coder.clone(), i.item_id)))
    {
        Some((pos, item)) => Json(ItemPayload::new(item, pos + 1, items.len())).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn respond(
    State(state): State<Arc<AppState>>,
    Path(kind): Path<String>,
    Json(sub): Json<Submission>,
) -> Response {
    let kind = match parse_kind(&kind) {
        Ok(k) => k,
        Err(r) => return r,
    };
    let coder = sub.coder.trim().to_string();
    if coder.is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "coder must be non-empty");
    }
    let Some(item) = state
        .items
        .get(&kind)
        .and_then(|v| v.iter().find(|i| i.item_id == sub.item_id))
    else {
        return error(StatusCode::NOT_FOUND, format!("no {} item {}", kind.as_str(), sub.item_id));
    };
    if sub.choice >= kind.choices() {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("choice must be in 0..{}", kind.choices()),
        );
    }
    let mut rec = state.recorder.lock().expect("recorder lock");
    let key = (coder.clone(), item.item_id);
    if rec.answered.contains(&key) {
        return error(StatusCode::CONFLICT, "already answered");
    }
    let line = ResponseLine {
        coder,
        item_id: item.item_id,
        kind,
        choice: sub.choice,
        received_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
    };
    if let Err(e) = rec.log.append(&line) {
        log::error!("{e}");
        return error(StatusCode::INTERNAL_SERVER_ERROR, "could not persist response");
    }
    rec.answered.insert(key);
    StatusCode::NO_CONTENT.into_response()
}

async fn progress(State(state): State<Arc<AppState>>, Query(q): Query<CoderQuery>) -> Response {
    let coder = match coder_of(q) {
        Ok(c) => c,
        Err(r) => return r,
    };
    let tasks = TaskKind::ALL
        .iter()
        .filter_map(|&k| {
            let total = state.items.get(&k)?.len();
            Some((
                k,
                TaskProgress {
                    answered: state.answered(&coder, k),
                    total,
                },
            ))
        })
        .collect();
    Json(Progress { coder, tasks }).into_response()
}

/// A single plain path segment: no separators, no `..`, no hidden files.
fn safe_segment(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && matches!(FsPath::new(s).components().collect::<Vec<_>>().as_slice(), [Component::Normal(_)])
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "jpg" | "jpeg" => "image/jpeg",
        "png" => "image/png",
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" => "application/json",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

fn send_file(path: &FsPath) -> Response {
    match std::fs::read(path) {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(path))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "not found"),
    }
}

async fn frame(State(state): State<Arc<AppState>>, Path((video_id, file)): Path<(String, String)>) -> Response {
    if !safe_segment(&video_id) || !safe_segment(&file) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    send_file(&state.run_dir.join("frames").join(video_id).join(file))
}

async fn index(State(state): State<Arc<AppState>>) -> Response {
    match &state.ui_dir {
        Some(dir) if dir.join("index.html").is_file() => send_file(&dir.join("index.html")),
        _ => Html(BUILTIN_UI).into_response(),
    }
}

async fn static_asset(State(state): State<Arc<AppState>>, uri: axum::http::Uri) -> Response {
    let Some(dir) = &state.ui_dir else {
        return error(StatusCode::NOT_FOUND, "not found");
    };
    let rel = uri.path().trim_start_matches('/');
    if rel.is_empty() || !rel.split('/').all(safe_segment) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    send_file(&dir.join(rel))
}
