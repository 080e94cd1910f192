//! Local HTTP service for the interactive loop.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/session` | `{"lf_path", "disparity"?, "params"?}` | `202 {"id", "status"}` |
//! | GET | `/session/{id}` | | session status |
//! | GET | `/session/{id}/central` | | central view PNG |
//! | POST | `/session/{id}/scribbles` | label map or stroke list | trace and image URLs |
//! | GET | `/session/{id}/overlay` | | overlay PNG |
//! | GET | `/session/{id}/mask/{label}` | | binary mask PNG |
//! | GET | `/session/{id}/epi` | `orientation=h&y=K` or `orientation=v&x=K`, `scale` | EPI PNG |
//! | GET, PUT | `/session/{id}/params` | JSON merge patch on PUT | effective params |
//!
//! Preprocessing runs in the background; poll the status until it reports
//! `ready`. Requests to one session are serialized: segmentations queue in
//! arrival order, read-only requests may overlap each other but not a
//! running segmentation.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::error::{Error, Stage};
use crate::graph::EdgeKind;
use crate::io::{disparity_source, encode_png_gray, encode_png_rgb, load_lightfield};
use crate::lfsp::{ScribbleMap, Strokes};
use crate::lightfield::Orientation;
use crate::params::Params;
use crate::pipeline::{Outcome, Session, Trace};
use crate::render::{epi_strip, overlay};

/// Preprocessing state of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Preprocessing,
    Ready {
        width: usize,
        height: usize,
        views: [usize; 2],
        lfsp_count: usize,
        spatial_edges: usize,
        angular_edges: usize,
        preprocessing_ms: f64,
    },
    Failed {
        stage: Option<Stage>,
        error: String,
    },
}

struct Slot {
    lf_path: PathBuf,
    status: Mutex<Status>,
    session: Arc<RwLock<Option<Session>>>,
}

/// Shared server state: the open sessions.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Slot>>>>,
}

/// An error response: `{"error": ..., "stage": ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<Stage>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            stage: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Load { .. } | Error::Io { .. } => StatusCode::NOT_FOUND,
            Error::Stage { source, .. } if matches!(**source, Error::Load { .. } | Error::Io { .. }) => {
                StatusCode::NOT_FOUND
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self {
            status,
            stage: e.stage(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "stage": self.stage}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], Body::from(bytes)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}", get(session_status))
        .route("/session/{id}/central", get(central_image))
        .route("/session/{id}/scribbles", post(post_scribbles))
        .route("/session/{id}/overlay", get(overlay_image))
        .route("/session/{id}/mask/{label}", get(mask_image))
        .route("/session/{id}/epi", get(epi_image))
        .route("/session/{id}/params", get(get_params).put(put_params))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default())).await
}

impl AppState {
    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

impl Slot {
    fn status(&self) -> Status {
        self.status.lock().expect("status").clone()
    }

    fn ensure_ready(&self) -> ApiResult<()> {
        match self.status() {
            Status::Ready { .. } => Ok(()),
            Status::Preprocessing => Err(ApiError::new(StatusCode::CONFLICT, "session is still preprocessing")),
            Status::Failed { stage, error } => Err(ApiError {
                status: StatusCode::CONFLICT,
                message: format!("session failed: {error}"),
                stage,
            }),
        }
    }
}

fn ready_status(session: &Session) -> Status {
    let pre = session.preprocessed();
    let g = session.light_field().geometry();
    Status::Ready {
        width: g.width,
        height: g.height,
        views: [g.u_count, g.v_count],
        lfsp_count: pre.segmentation.count(),
        spatial_edges: pre.adjacency.count(EdgeKind::Spatial),
        angular_edges: pre.adjacency.count(EdgeKind::Angular),
        preprocessing_ms: pre.timings.preprocessing_ms(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    lf_path: PathBuf,
    /// `estimate` (default), `gt`, or a PFM path.
    #[serde(default)]
    disparity: Option<String>,
    /// Partial params document applied over the defaults.
    #[serde(default)]
    params: Option<Value>,
}

async fn create_session(State(state): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<Response> {
    let choice = req.disparity.unwrap_or_else(|| "estimate".into());
    let base = if choice == "estimate" {
        Params::for_estimated_disparity()
    } else {
        Params::default()
    };
    let params = match &req.params {
        Some(patch) => base.merged_with_json(&patch.to_string())?,
        None => base,
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let slot = Arc::new(Slot {
        lf_path: req.lf_path.clone(),
        status: Mutex::new(Status::Preprocessing),
        session: Arc::new(RwLock::new(None)),
    });
    state.sessions.lock().expect("session table").insert(id.clone(), slot.clone());

    let mut guard = slot.session.clone().write_owned().await;
    let worker = slot.clone();
    tokio::task::spawn_blocking(move || {
        let built = load_lightfield(&worker.lf_path)
            .map_err(|e| e.in_stage(Stage::Load))
            .and_then(|lf| {
                let source = disparity_source(&choice, &worker.lf_path, lf.geometry()).map_err(|e| e.in_stage(Stage::Load))?;
                Session::new(Arc::new(lf), source, params)
            });
        let status = match built {
            Ok(session) => {
                let status = ready_status(&session);
                *guard = Some(session);
                status
            }
            Err(e) => {
                log::warn!("session preprocessing failed: {e}");
                Status::Failed {
                    stage: e.stage(),
                    error: e.to_string(),
                }
            }
        };
        *worker.status.lock().expect("status") = status;
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"id": id, "status": Status::Preprocessing}))).into_response())
}

async fn session_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = state.slot(&id)?;
    Ok(Json(json!({"id": id, "lf_path": slot.lf_path, "status": slot.status()})))
}

async fn central_image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let guard = slot.session.read().await;
    let lf = guard.as_ref().expect("ready session").light_field().clone();
    let g = *lf.geometry();
    Ok(png(encode_png_rgb(g.width, g.height, lf.central_srgb())))
}

/// A scribble upload: a stroke list or a raw central-view label map.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScribbleBody {
    Strokes(Strokes),
    Map { width: usize, height: usize, labels: Vec<u8> },
}

#[derive(Debug, Serialize)]
struct SegmentResponse {
    label_count: u8,
    trace: Trace,
    overlay: String,
    masks: Vec<String>,
}

async fn post_scribbles(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<ScribbleBody>,
) -> ApiResult<Json<SegmentResponse>> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let map = match body {
        ScribbleBody::Strokes(s) => s.rasterize(),
        ScribbleBody::Map { width, height, labels } => ScribbleMap::new(width, height, labels),
    }
    .map_err(|e| ApiError::from(e.in_stage(Stage::Scribbles)))?;
    // Write locks are granted in request order, which queues segmentations.
    let mut guard = slot.session.clone().write_owned().await;
    let (outcome, trace) = tokio::task::spawn_blocking(move || {
        let session = guard.as_mut().expect("ready session");
        let outcome = session.segment(map)?;
        let mut timings = session.preprocessed().timings.clone();
        timings.stages.extend(outcome.timings.stages.iter().copied());
        let trace = Trace::new(&outcome, timings);
        Ok::<_, Error>((outcome, trace))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let label_count = outcome.labels().label_count();
    Ok(Json(SegmentResponse {
        label_count,
        trace,
        overlay: format!("/session/{id}/overlay"),
        masks: (1..=label_count).map(|l| format!("/session/{id}/mask/{l}")).collect(),
    }))
}

/// Central-view labels of the last segmentation.
fn central_labels(session: &Session, outcome: &Outcome) -> Vec<u8> {
    let labels = outcome.labels();
    session
        .preprocessed()
        .segmentation
        .central()
        .iter()
        .map(|&id| labels.get(id as usize))
        .collect()
}

fn last_outcome(session: &Session) -> ApiResult<Arc<Outcome>> {
    session
        .last()
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no segmentation yet; post scribbles first"))
}

async fn overlay_image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let guard = slot.session.read().await;
    let session = guard.as_ref().expect("ready session");
    let outcome = last_outcome(session)?;
    let g = *session.light_field().geometry();
    let labels = central_labels(session, &outcome);
    let pixels = overlay(session.light_field().central_srgb(), &labels, g.width, g.height, 0.45);
    Ok(png(encode_png_rgb(g.width, g.height, &pixels)))
}

async fn mask_image(State(state): State<AppState>, Path((id, label)): Path<(String, u8)>) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let guard = slot.session.read().await;
    let session = guard.as_ref().expect("ready session");
    let outcome = last_outcome(session)?;
    if label == 0 || label > outcome.labels().label_count() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("no label {label}")));
    }
    let g = *session.light_field().geometry();
    let mask: Vec<u8> = central_labels(session, &outcome)
        .iter()
        .map(|&l| if l == label { 255 } else { 0 })
        .collect();
    Ok(png(encode_png_gray(g.width, g.height, &mask)))
}

#[derive(Debug, Deserialize)]
struct EpiQuery {
    #[serde(default = "default_orientation")]
    orientation: String,
    x: Option<usize>,
    y: Option<usize>,
    #[serde(default = "default_scale")]
    scale: usize,
}

fn default_orientation() -> String {
    "h".into()
}

fn default_scale() -> usize {
    4
}

async fn epi_image(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EpiQuery>,
) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let guard = slot.session.read().await;
    let session = guard.as_ref().expect("ready session");
    let lf = session.light_field();
    let g = *lf.geometry();
    let (orientation, fixed) = match (q.orientation.as_str(), q.x, q.y) {
        ("h" | "horizontal", _, Some(y)) => (Orientation::Horizontal, (g.central_v, y)),
        ("v" | "vertical", Some(x), _) => (Orientation::Vertical, (g.central_u, x)),
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "use orientation=h with y, or orientation=v with x",
            ))
        }
    };
    let labels = match session.last() {
        Some(outcome) => Some(outcome.labels().expand(&session.preprocessed().segmentation)?),
        None => None,
    };
    let strip = epi_strip(lf, labels.as_ref(), orientation, fixed, q.scale.min(64))?;
    Ok(png(encode_png_rgb(strip.width, strip.height, &strip.pixels)))
}

async fn get_params(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Params>> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let guard = slot.session.read().await;
    Ok(Json(*guard.as_ref().expect("ready session").params()))
}

async fn put_params(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(patch): Json<Value>,
) -> ApiResult<Json<Value>> {
    let slot = state.slot(&id)?;
    slot.ensure_ready()?;
    let mut guard = slot.session.clone().write_owned().await;
    let (params, redone, status) = tokio::task::spawn_blocking(move || {
        let session = guard.as_mut().expect("ready session");
        let params = session.params().merged_with_json(&patch.to_string())?;
        let redone = session.set_params(params)?;
        Ok::<_, Error>((params, redone, ready_status(session)))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    *slot.status.lock().expect("status") = status;
    Ok(Json(json!({"params": params, "preprocessing_redone": redone})))
}
