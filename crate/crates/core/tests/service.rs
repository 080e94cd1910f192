#![cfg(feature = "service")]

use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lfseg::disparity::DisparityMap;
use lfseg::io::{save_ground_truth, save_lightfield};
use lfseg::params::Params;
use lfseg::pipeline::{segment, DisparitySource};
use lfseg::service::{router, AppState};
use lfseg::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn wait_ready(app: &Router, id: &str) -> Value {
    for _ in 0..500 {
        let (status, v) = call_json(app, "GET", &format!("/session/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"]["state"] != "preprocessing" {
            return v["status"].clone();
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("session {id} never left preprocessing");
}

fn write_scene(dir: &Path) -> lfseg::synth::SceneSpec {
    let spec = three_planes(5, 5, 64, 64);
    let (lf, gt) = synth_scene(&spec).unwrap();
    save_lightfield(dir, &lf).unwrap();
    save_ground_truth(dir, &gt).unwrap();
    spec
}

fn png_size(bytes: &[u8]) -> (u32, u32) {
    let img = image::load_from_memory(bytes).unwrap();
    (img.width(), img.height())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn interactive_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_scene(tmp.path());
    let app = router(AppState::default());

    let (status, created) =
        call_json(&app, "POST", "/session", Some(json!({"lf_path": tmp.path(), "disparity": "gt"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = created["id"].as_str().unwrap().to_string();
    let ready = wait_ready(&app, &id).await;
    assert_eq!(ready["state"], "ready", "{ready}");
    assert_eq!(ready["views"], json!([5, 5]));
    assert!(ready["lfsp_count"].as_u64().unwrap() > 0);

    let (status, png) = call(&app, "GET", &format!("/session/{id}/central"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(png_size(&png), (64, 64));

    // Nothing to show before the first segmentation.
    let (status, _) = call(&app, "GET", &format!("/session/{id}/overlay"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, gt) = synth_scene(&spec).unwrap();
    let strokes = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense());
    let (status, seg) = call_json(
        &app,
        "POST",
        &format!("/session/{id}/scribbles"),
        Some(serde_json::to_value(&strokes).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{seg}");
    assert_eq!(seg["label_count"], 3);
    let energy: Vec<f64> = seg["trace"]["energy"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(seg["trace"]["optimize_ms"].as_f64().is_some());
    assert_eq!(seg["masks"].as_array().unwrap().len(), 3);

    // The served masks match a library run with the same strokes.
    let g = spec.geometry();
    let source = DisparitySource::Given(DisparityMap::from_values(g.width, g.height, gt.disparity.clone()).unwrap());
    let run = segment(&synth_scene(&spec).unwrap().0, &source, &strokes.rasterize().unwrap(), &Params::default()).unwrap();
    let central = run.view_labels();
    let central = central.central();
    for label in 1..=3u8 {
        let (status, png) = call(&app, "GET", &format!("/session/{id}/mask/{label}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let mask = image::load_from_memory(&png).unwrap().to_luma8();
        for (i, px) in mask.pixels().enumerate() {
            assert_eq!(px.0[0] == 255, central[i] == label);
        }
    }
    let (status, _) = call(&app, "GET", &format!("/session/{id}/mask/4"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, png) = call(&app, "GET", &format!("/session/{id}/overlay"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(png_size(&png), (64, 64));
    let (status, png) = call(&app, "GET", &format!("/session/{id}/epi?orientation=v&x=30&scale=2"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(png_size(&png), (64, 2 * 5 * 2 + 1));
    let (status, _) = call(&app, "GET", &format!("/session/{id}/epi?orientation=h"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", &format!("/session/{id}/epi?orientation=h&y=64"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // A raw label map is accepted too.
    let map = strokes.rasterize().unwrap();
    let body = json!({"width": map.width, "height": map.height, "labels": map.labels});
    let (status, _) = call_json(&app, "POST", &format!("/session/{id}/scribbles"), Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let bad = json!({"width": 3, "height": 3, "labels": [0, 1]});
    let (status, err) = call_json(&app, "POST", &format!("/session/{id}/scribbles"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["stage"], "scribbles");

    // Energy-only edits keep the cached graph; superpixel edits rebuild it.
    let (status, v) = call_json(&app, "PUT", &format!("/session/{id}/params"), Some(json!({"energy": {"lambda_s": 3.0}}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["preprocessing_redone"], false);
    assert_eq!(v["params"]["energy"]["lambda_s"], 3.0);
    let (status, v) = call_json(&app, "PUT", &format!("/session/{id}/params"), Some(json!({"lfsp": {"size": 12}}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["preprocessing_redone"], true);
    let (_, params) = call_json(&app, "GET", &format!("/session/{id}/params"), None).await;
    assert_eq!(params["lfsp"]["size"], 12);
    assert_eq!(params["energy"]["lambda_s"], 3.0);
    let (status, _) = call_json(&app, "PUT", &format!("/session/{id}/params"), Some(json!({"energy": {"lambda_s": -1}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_sessions_and_bad_paths() {
    let app = router(AppState::default());
    let (status, _) = call(&app, "GET", "/session/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/session/nope/scribbles", Some(json!({"width": 1, "height": 1, "labels": [1]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, created) = call_json(&app, "POST", "/session", Some(json!({"lf_path": "/definitely/not/here"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = created["id"].as_str().unwrap().to_string();
    let st = wait_ready(&app, &id).await;
    assert_eq!(st["state"], "failed");
    assert_eq!(st["stage"], "load");
    let (status, err) = call_json(&app, "GET", &format!("/session/{id}/central"), None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{err}");

    let (status, _) = call(&app, "POST", "/session", Some(json!({"path": "x"}))).await;
    assert!(status.is_client_error());
}
