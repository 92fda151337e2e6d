//! In-memory session service for the interactive marker workflow.
//!
//! A session freezes the image, palette, superpixels and pre-merge graph at
//! creation. Every marker change reruns class-consistent merging on a copy
//! of that snapshot, so the result depends only on the current marker set.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | multipart: `image` file, optional `m`, `k`, `alpha` | 201 [`SessionCreated`] |
//! | POST | `/sessions/{id}/markers` | `{"x":..,"y":..,"class":".."}` | [`LabelsReply`] |
//! | DELETE | `/sessions/{id}/markers/last` | none | [`LabelsReply`] |
//! | GET | `/sessions/{id}/labels` | none | [`LabelsReply`] |
//! | DELETE | `/sessions/{id}` | none | 204 |
//!
//! Errors reply `{"error": ".."}` with 404 for an unknown or expired
//! session, 400 for a malformed request or marker, and 409 when a marker
//! would put two classes in one superpixel (the marker is not kept) or when
//! there is nothing to undo.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use otseg::image::decode_image;
use otseg::labels::RleLabels;
use otseg::merge::{run_marker, Marker, MarkerOutcome, MarkerSet};
use otseg::pipeline::{prepare, PipelineConfig};
use otseg::{Error, LabelMap, RegionGraph};
use serde::Serialize;

use crate::args::convert;
use crate::boundaries::boundary_polylines;

pub const DEFAULT_SUPERPIXELS: usize = 300;
pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);
const MAX_UPLOAD: usize = 64 << 20;

struct Session {
    graph: RegionGraph,
    superpixels: LabelMap,
    markers: Vec<Marker>,
    outcome: Option<MarkerOutcome>,
}

struct Entry {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

/// Live sessions keyed by id. The map lock is held only for lookups; each
/// session has its own lock for the duration of a mutation.
pub struct AppState {
    sessions: Mutex<HashMap<String, Entry>>,
    idle: Duration,
}

impl AppState {
    pub fn new(idle: Duration) -> Arc<Self> {
        Arc::new(AppState {
            sessions: Mutex::new(HashMap::new()),
            idle,
        })
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut map = self.sessions.lock().expect("session map poisoned");
        let now = Instant::now();
        match map.get_mut(id) {
            Some(e) if now.duration_since(e.last_used) < self.idle => {
                e.last_used = now;
                Ok(e.session.clone())
            }
            Some(_) => {
                map.remove(id);
                Err(ApiError::not_found(id))
            }
            None => Err(ApiError::not_found(id)),
        }
    }

    /// Drops sessions idle for longer than the configured limit.
    pub fn sweep(&self) -> usize {
        let mut map = self.sessions.lock().expect("session map poisoned");
        let before = map.len();
        let idle = self.idle;
        map.retain(|_, e| e.last_used.elapsed() < idle);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("no session {id}"),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ConflictingMarkers { .. } => StatusCode::CONFLICT,
            Error::Read { .. } | Error::Write { .. } | Error::NotConverged(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

type Polylines = Vec<Vec<[u32; 2]>>;

#[derive(Debug, Serialize)]
pub struct SessionCreated {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub superpixels: RleLabels,
    pub boundaries: Polylines,
}

/// Current map of a session: the superpixels while no marker is placed,
/// afterwards the class map (0 unassigned, classes from 1 in name order).
#[derive(Debug, Serialize)]
pub struct LabelsReply {
    /// `"superpixels"` or `"classes"`.
    pub kind: &'static str,
    pub labels: RleLabels,
    pub class_names: Vec<String>,
    pub markers: Vec<Marker>,
    pub boundaries: Polylines,
}

impl Session {
    fn reply(&self) -> LabelsReply {
        let (kind, map, class_names) = match &self.outcome {
            Some(o) => ("classes", &o.classes, o.class_names.clone()),
            None => ("superpixels", &self.superpixels, Vec::new()),
        };
        LabelsReply {
            kind,
            labels: RleLabels::encode(map),
            class_names,
            markers: self.markers.clone(),
            boundaries: boundary_polylines(map),
        }
    }

    fn recompute(&self, markers: &[Marker]) -> Result<Option<MarkerOutcome>, Error> {
        if markers.is_empty() {
            return Ok(None);
        }
        let (w, h) = (self.superpixels.width(), self.superpixels.height());
        let set = MarkerSet::new(markers.to_vec(), w, h)?;
        run_marker(self.graph.clone(), &set).map(Some)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", delete(delete_session))
        .route("/sessions/{id}/markers", post(add_marker))
        .route("/sessions/{id}/markers/last", delete(undo_marker))
        .route("/sessions/{id}/labels", get(get_labels))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })?
}

fn parse_field<T: std::str::FromStr>(name: &str, text: &str) -> Result<T, ApiError> {
    text.trim()
        .parse()
        .map_err(|_| ApiError::bad_request(format!("field {name}: cannot parse {text:?}")))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    mut form: Multipart,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut image = None;
    let mut cfg = PipelineConfig::new(DEFAULT_SUPERPIXELS);
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let text = || String::from_utf8_lossy(&bytes).into_owned();
        match name.as_str() {
            "image" => image = Some(bytes.clone()),
            "m" => cfg.slic.superpixels = parse_field("m", &text())?,
            "k" => cfg.palette_size = parse_field("k", &text())?,
            "alpha" => cfg.slic.compactness = parse_field("alpha", &text())?,
            other => return Err(ApiError::bad_request(format!("unknown field {other:?}"))),
        }
    }
    let bytes = image.ok_or_else(|| ApiError::bad_request("missing field image"))?;
    let session = blocking(move || {
        let img = convert(decode_image(&bytes)?, None, None)?;
        let prepared = prepare(&img, &cfg)?;
        Ok(Session {
            graph: prepared.graph,
            superpixels: prepared.superpixels,
            markers: Vec::new(),
            outcome: None,
        })
    })
    .await?;
    let created = SessionCreated {
        id: uuid::Uuid::new_v4().simple().to_string(),
        width: session.superpixels.width(),
        height: session.superpixels.height(),
        superpixels: RleLabels::encode(&session.superpixels),
        boundaries: boundary_polylines(&session.superpixels),
    };
    state.sessions.lock().expect("session map poisoned").insert(
        created.id.clone(),
        Entry {
            session: Arc::new(Mutex::new(session)),
            last_used: Instant::now(),
        },
    );
    Ok((StatusCode::CREATED, Json(created)))
}

async fn add_marker(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Marker>, JsonRejection>,
) -> Result<Json<LabelsReply>, ApiError> {
    let session = state.lookup(&id)?;
    let Json(marker) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        let mut markers = s.markers.clone();
        markers.push(marker);
        s.outcome = s.recompute(&markers)?;
        s.markers = markers;
        Ok(Json(s.reply()))
    })
    .await
}

async fn undo_marker(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<LabelsReply>, ApiError> {
    let session = state.lookup(&id)?;
    blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        if s.markers.is_empty() {
            return Err(ApiError::conflict("no marker to undo"));
        }
        let mut markers = s.markers.clone();
        markers.pop();
        s.outcome = s.recompute(&markers)?;
        s.markers = markers;
        Ok(Json(s.reply()))
    })
    .await
}

async fn get_labels(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<LabelsReply>, ApiError> {
    let session = state.lookup(&id)?;
    blocking(move || Ok(Json(session.lock().expect("session poisoned").reply()))).await
}

async fn delete_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    state.lookup(&id)?;
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

/// Serves until the process is stopped, sweeping idle sessions once a minute.
pub async fn serve(bind: &str, idle: Duration) -> std::io::Result<()> {
    let state = AppState::new(idle);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
