//! Drives the HTTP API in-process: create a session, poll until it is
//! ready, post scribbles and fetch the overlay.
//!
//! cargo run --release --example service

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use lfseg::io::{save_ground_truth, save_lightfield};
use lfseg::service::{router, AppState};
use lfseg::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .expect("request");
    let resp = app.clone().oneshot(req).await.expect("infallible");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes().to_vec();
    (status, bytes)
}

#[tokio::main]
async fn main() -> lfseg::Result<()> {
    let dir = std::env::temp_dir().join("lfseg-service");
    let (lf, gt) = synth_scene(&three_planes(9, 9, 96, 96))?;
    save_lightfield(&dir, &lf)?;
    save_ground_truth(&dir, &gt)?;
    let strokes = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense());

    let app = router(AppState::default());
    let (status, body) = call(&app, "POST", "/session", Some(json!({"lf_path": dir, "disparity": "gt"}))).await;
    let created: Value = serde_json::from_slice(&body).expect("json");
    println!("POST /session -> {status} {created}");
    let id = created["id"].as_str().expect("id").to_string();

    loop {
        let (_, body) = call(&app, "GET", &format!("/session/{id}"), None).await;
        let v: Value = serde_json::from_slice(&body).expect("json");
        if v["status"]["state"] != "preprocessing" {
            println!("GET /session/{id} -> {v}");
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }

    let strokes = serde_json::to_value(&strokes).expect("strokes");
    let (status, body) = call(&app, "POST", &format!("/session/{id}/scribbles"), Some(strokes)).await;
    let v: Value = serde_json::from_slice(&body).expect("json");
    println!("POST scribbles -> {status}, {} labels, energy {}", v["label_count"], v["trace"]["energy"]);

    let (status, png) = call(&app, "GET", &format!("/session/{id}/overlay"), None).await;
    println!("GET overlay -> {status}, {} bytes of PNG", png.len());
    let (status, png) = call(&app, "GET", &format!("/session/{id}/epi?orientation=h&y=48"), None).await;
    println!("GET epi -> {status}, {} bytes of PNG", png.len());
    Ok(())
}
