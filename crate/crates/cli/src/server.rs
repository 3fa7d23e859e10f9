//! Local HTTP service for manual registration.
//!
//! | method | path                    | body                                   | reply            |
//! |--------|-------------------------|----------------------------------------|------------------|
//! | GET    | /api/frames             |                                        | frame list       |
//! | GET    | /api/frame/{id}         |                                        | background PNG   |
//! | POST   | /api/render             | `{"frame", "pose", "opacity"}`         | overlay PNG      |
//! | GET    | /api/pose/{id}          |                                        | session state    |
//! | POST   | /api/pose/{id}          | `{"revision", "pose"}`                 | session state    |
//! | POST   | /api/pose/{id}/save     |                                        | session state    |
//!
//! Poses travel as pose records. Each frame has one session whose revision
//! increases with every accepted write; a write must quote the current
//! revision or it is rejected with 409 and the current state. Saving writes
//! `<output>/poses/<id>.json`.

use crate::commands::{initial_pose, write_file};
use crate::config::ProjectConfig;
use crate::error::CliError;
use crate::render::{decode_frame, overlay_png, DEFAULT_OPACITY};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use surfreg::camera::{CameraModel, Pose, PoseRecord};
use surfreg::SurfaceParameterization;

#[derive(Debug)]
struct Session {
    pose: Pose,
    revision: u64,
    saved_revision: Option<u64>,
}

pub struct ServiceState {
    param: Arc<SurfaceParameterization>,
    camera: CameraModel,
    frames: BTreeMap<String, PathBuf>,
    sessions: BTreeMap<String, Mutex<Session>>,
    pose_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub frame: String,
    pub revision: u64,
    pub saved_revision: Option<u64>,
    pub pose: PoseRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    pub url: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameList {
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderRequest {
    pub frame: String,
    pub pose: PoseRecord,
    #[serde(default = "default_opacity")]
    pub opacity: f64,
}

fn default_opacity() -> f64 {
    DEFAULT_OPACITY
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseUpdate {
    pub revision: u64,
    pub pose: PoseRecord,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    current: Option<SessionView>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            current: None,
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown frame `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            error: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            current: Option<SessionView>,
        }
        let body = Body {
            error: self.message,
            current: self.current,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.message)
    }
}

/// PNG files of `dir`, keyed by file stem.
fn scan_frames(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| crate::error::io_error(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| crate::error::io_error(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

impl ServiceState {
    /// Sessions start from the saved pose file of their frame when one
    /// exists, otherwise from the region centered at `depth` millimeters.
    pub fn new(
        cfg: &ProjectConfig,
        param: Arc<SurfaceParameterization>,
        depth: f64,
    ) -> Result<Self, CliError> {
        let dir = cfg
            .frames
            .as_ref()
            .ok_or_else(|| CliError::input("the config names no `frames` directory"))?;
        let frames = scan_frames(dir)?;
        let pose_dir = cfg.output.join("poses");
        let start = initial_pose(&param, depth);
        let mut sessions = BTreeMap::new();
        for id in frames.keys() {
            let saved = pose_dir.join(format!("{id}.json"));
            let session = if saved.exists() {
                Session {
                    pose: crate::commands::read_pose(&saved, &cfg.camera)?,
                    revision: 0,
                    saved_revision: Some(0),
                }
            } else {
                Session {
                    pose: start,
                    revision: 0,
                    saved_revision: None,
                }
            };
            sessions.insert(id.clone(), Mutex::new(session));
        }
        Ok(Self {
            param,
            camera: cfg.camera,
            frames,
            sessions,
            pose_dir,
        })
    }

    fn session(&self, id: &str) -> Result<&Mutex<Session>, ApiError> {
        self.sessions.get(id).ok_or_else(|| ApiError::not_found(id))
    }

    fn view(&self, id: &str, s: &Session) -> SessionView {
        SessionView {
            frame: id.to_string(),
            revision: s.revision,
            saved_revision: s.saved_revision,
            pose: PoseRecord::new(&s.pose, &self.camera),
        }
    }

    /// The pose of a record, which must be valid and use the service camera.
    fn checked_pose(&self, rec: &PoseRecord) -> Result<Pose, ApiError> {
        if rec.camera != self.camera {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("pose record camera {:?} differs from the service camera", rec.camera),
            ));
        }
        rec.pose()
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
    }
}

fn lock(m: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn list_frames(State(st): State<Arc<ServiceState>>) -> Json<FrameList> {
    let frames = st
        .frames
        .keys()
        .map(|id| FrameEntry {
            id: id.clone(),
            url: format!("/api/frame/{id}"),
        })
        .collect();
    Json(FrameList { frames })
}

async fn read_frame_bytes(st: &ServiceState, id: &str) -> Result<Vec<u8>, ApiError> {
    let path = st.frames.get(id).ok_or_else(|| ApiError::not_found(id))?;
    tokio::fs::read(path)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{id}: {e}")))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn get_frame(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    Ok(png(read_frame_bytes(&st, &id).await?))
}

async fn render(
    State(st): State<Arc<ServiceState>>,
    Json(req): Json<RenderRequest>,
) -> Result<Response, ApiError> {
    let pose = st.checked_pose(&req.pose)?;
    if !(0.0..=1.0).contains(&req.opacity) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("opacity must lie in [0, 1], got {}", req.opacity),
        ));
    }
    let bytes = read_frame_bytes(&st, &req.frame).await?;
    let st2 = st.clone();
    let out = tokio::task::spawn_blocking(move || {
        let frame = decode_frame(&bytes, &st2.camera)?;
        overlay_png(&st2.param, &st2.camera, &pose, &frame, req.opacity)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(png(out))
}

async fn get_pose(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let s = lock(st.session(&id)?);
    Ok(Json(st.view(&id, &s)))
}

async fn set_pose(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    Json(update): Json<PoseUpdate>,
) -> Result<Json<SessionView>, ApiError> {
    let mut s = lock(st.session(&id)?);
    if update.revision != s.revision {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            message: format!(
                "stale revision {} (current revision is {})",
                update.revision, s.revision
            ),
            current: Some(st.view(&id, &s)),
        });
    }
    s.pose = st.checked_pose(&update.pose)?;
    s.revision += 1;
    Ok(Json(st.view(&id, &s)))
}

async fn save_pose(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let mut s = lock(st.session(&id)?);
    let path = st.pose_dir.join(format!("{id}.json"));
    let rec = PoseRecord::new(&s.pose, &st.camera);
    write_file(&path, rec.to_json().as_bytes())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.message))?;
    s.saved_revision = Some(s.revision);
    Ok(Json(st.view(&id, &s)))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/frames", get(list_frames))
        .route("/api/frame/{id}", get(get_frame))
        .route("/api/render", post(render))
        .route("/api/pose/{id}", get(get_pose).post(set_pose))
        .route("/api/pose/{id}/save", post(save_pose))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::input(format!("cannot bind {addr}: {e}")))?;
    println!("listening on http://{addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| CliError::input(format!("server: {e}")))
}
