//! The manual-registration API, exercised in-process.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nalgebra::Rotation3;
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;
use surfreg::camera::{CameraModel, Pose, PoseRecord};
use surfreg::Vec3;
use surfreg_cli::commands::{example, render, ExampleShape, RenderArgs};
use surfreg_cli::config::ProjectConfig;
use surfreg_cli::server::{router, FrameList, ServiceState, SessionView};
use tower::ServiceExt;

struct Fixture {
    dir: tempfile::TempDir,
    cfg: ProjectConfig,
    param: Arc<surfreg::SurfaceParameterization>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path(), ExampleShape::Ossicle).unwrap();
    let cfg = ProjectConfig::load(&dir.path().join("config.toml")).unwrap();
    let param = Arc::new(cfg.compute_parameterization().unwrap());
    Fixture { dir, cfg, param }
}

impl Fixture {
    fn app(&self) -> Router {
        router(Arc::new(ServiceState::new(&self.cfg, self.param.clone(), 700.0).unwrap()))
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn get_state(app: &Router, id: &str) -> SessionView {
    let (status, body) = call(app, "GET", &format!("/api/pose/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_slice(&body).unwrap()
}

async fn post_pose(app: &Router, id: &str, revision: u64, rec: &PoseRecord) -> (StatusCode, Value) {
    let (status, body) = call(
        app,
        "POST",
        &format!("/api/pose/{id}"),
        Some(json!({ "revision": revision, "pose": rec })),
    )
    .await;
    (status, serde_json::from_slice(&body).unwrap())
}

/// Rotation about the camera z axis by `deg`, applied after the pose.
fn turn_z(pose: &Pose, deg: f64) -> Pose {
    let r = Rotation3::from_axis_angle(&Vec3::z_axis(), deg.to_radians()).into_inner();
    Pose {
        rotation: r * pose.rotation,
        translation: r * pose.translation,
    }
}

#[tokio::test]
async fn frames_are_listed_and_served() {
    let f = fixture();
    let app = f.app();
    let (status, body) = call(&app, "GET", "/api/frames", None).await;
    assert_eq!(status, StatusCode::OK);
    let list: FrameList = serde_json::from_slice(&body).unwrap();
    assert_eq!(list.frames.len(), 1);
    assert_eq!(list.frames[0].id, "frame000");
    let (status, png) = call(&app, "GET", &list.frames[0].url, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(png, std::fs::read(f.dir.path().join("frames/frame000.png")).unwrap());
    assert_eq!(call(&app, "GET", "/api/frame/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/api/pose/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn pose_round_trip_and_stale_revisions() {
    let f = fixture();
    let app = f.app();
    let start = get_state(&app, "frame000").await;
    assert_eq!(start.revision, 0);
    assert_eq!(start.saved_revision, None);

    let pose = start.pose.pose().unwrap();
    let moved = PoseRecord::new(
        &Pose {
            translation: pose.translation + Vec3::new(1.0, 0.0, 0.0),
            ..pose
        },
        &f.cfg.camera,
    );
    let (status, v) = post_pose(&app, "frame000", 0, &moved).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 1);
    let now = get_state(&app, "frame000").await;
    assert_eq!(now.pose, moved);
    assert_eq!(now.pose.translation[0], start.pose.translation[0] + 1.0);

    // a second write quoting the old revision loses
    let (status, v) = post_pose(&app, "frame000", 0, &start.pose).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["current"]["revision"], 1);
    assert_eq!(get_state(&app, "frame000").await.pose, moved);
}

#[tokio::test]
async fn invalid_pose_writes_are_rejected() {
    let f = fixture();
    let app = f.app();
    let mut bad = get_state(&app, "frame000").await.pose;
    bad.rotation[0] = 2.0;
    let (status, _) = post_pose(&app, "frame000", 0, &bad).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let mut other = get_state(&app, "frame000").await.pose;
    other.camera = CameraModel::new(1000.0, 1920, 1080).unwrap();
    let (status, _) = post_pose(&app, "frame000", 0, &other).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(get_state(&app, "frame000").await.revision, 0);
}

#[tokio::test]
async fn opposite_turns_restore_the_pose() {
    let f = fixture();
    let app = f.app();
    let start = get_state(&app, "frame000").await;
    let p0 = start.pose.pose().unwrap();
    let p1 = turn_z(&p0, 30.0);
    let (status, _) = post_pose(&app, "frame000", 0, &PoseRecord::new(&p1, &f.cfg.camera)).await;
    assert_eq!(status, StatusCode::OK);
    let back = get_state(&app, "frame000").await.pose.pose().unwrap();
    let p2 = turn_z(&back, -30.0);
    let (status, v) = post_pose(&app, "frame000", 1, &PoseRecord::new(&p2, &f.cfg.camera)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 2);
    let end = get_state(&app, "frame000").await.pose.pose().unwrap();
    assert!((end.rotation - p0.rotation).abs().max() < 1e-9);
    assert!((end.translation - p0.translation).abs().max() < 1e-9);
}

fn read_saved(dir: &Path) -> Vec<u8> {
    std::fs::read(dir.join("out/poses/frame000.json")).unwrap()
}

#[tokio::test]
async fn saved_poses_persist_across_restarts() {
    let f = fixture();
    let app = f.app();
    let start = get_state(&app, "frame000").await;
    let pose = turn_z(&start.pose.pose().unwrap(), 12.5);
    let rec = PoseRecord::new(&pose, &f.cfg.camera);
    post_pose(&app, "frame000", 0, &rec).await;
    let (status, body) = call(&app, "POST", "/api/pose/frame000/save", None).await;
    assert_eq!(status, StatusCode::OK);
    let saved: SessionView = serde_json::from_slice(&body).unwrap();
    assert_eq!(saved.saved_revision, Some(1));
    let first = read_saved(f.dir.path());
    assert_eq!(PoseRecord::from_json(std::str::from_utf8(&first).unwrap()).unwrap(), rec);

    // saving again without edits rewrites the same bytes
    call(&app, "POST", "/api/pose/frame000/save", None).await;
    assert_eq!(read_saved(f.dir.path()), first);

    // a fresh service starts from the saved pose
    let restarted = f.app();
    let state = get_state(&restarted, "frame000").await;
    assert_eq!(state.pose, rec);
    assert_eq!(state.saved_revision, Some(0));
}

#[tokio::test]
async fn service_render_matches_the_render_command() {
    let f = fixture();
    let app = f.app();
    let start = get_state(&app, "frame000").await;
    let pose = turn_z(&start.pose.pose().unwrap(), -40.0);
    let rec = PoseRecord::new(&pose, &f.cfg.camera);
    post_pose(&app, "frame000", 0, &rec).await;
    call(&app, "POST", "/api/pose/frame000/save", None).await;

    let (status, served) = call(
        &app,
        "POST",
        "/api/render",
        Some(json!({ "frame": "frame000", "pose": rec, "opacity": 0.35 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    let overlay = f.dir.path().join("cmd_overlay.png");
    let pose_file = f.dir.path().join("out/poses/frame000.json");
    let frame = f.dir.path().join("frames/frame000.png");
    render(
        &f.cfg,
        &RenderArgs {
            pose: &pose_file,
            frame: Some(&frame),
            opacity: 0.35,
            map_out: Some(&f.dir.path().join("cmd_map.png")),
            overlay_out: Some(&overlay),
        },
    )
    .unwrap();
    assert_eq!(served, std::fs::read(&overlay).unwrap());
    assert_ne!(served, std::fs::read(&frame).unwrap());
}

#[tokio::test]
async fn render_rejects_bad_requests() {
    let f = fixture();
    let app = f.app();
    let rec = get_state(&app, "frame000").await.pose;
    let (status, _) = call(
        &app,
        "POST",
        "/api/render",
        Some(json!({ "frame": "frame000", "pose": rec, "opacity": 1.5 })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/api/render",
        Some(json!({ "frame": "missing", "pose": rec })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
