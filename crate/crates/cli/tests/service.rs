use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hedgecast::service::{router, AppState};
use hedgecast_core::trial_store::{generate_trials, DEFAULT_MEAN_RANGE, DEFAULT_SD_RANGE};
use hedgecast_core::{validate_json, EngineConfig, TemplateSet};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn app(dir: &tempfile::TempDir) -> Router {
    let trials = generate_trials(3, 42, DEFAULT_MEAN_RANGE, DEFAULT_SD_RANGE).unwrap();
    let state = AppState::new(
        trials,
        &EngineConfig::default(),
        &dir.path().join("t.ndjson"),
        Some(7),
    )
    .unwrap();
    router(Arc::new(state), None)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: &str) -> Request<Body> {
    Request::post("/api/telemetry")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn lists_trials_and_serves_valid_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let (status, body) = call(&app, get("/api/trials")).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(ids["trial_ids"], serde_json::json!([0, 1, 2]));

    let (status, body) = call(&app, get("/api/trial/2/bundle")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(validate_json(&body, &TemplateSet::default()).is_empty());
    let (_, again) = call(&app, get("/api/trial/2/bundle")).await;
    assert_eq!(body, again);

    let (status, body) = call(&app, get("/api/trial/99/bundle")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body.contains("99"));
}

#[tokio::test]
async fn random_trial_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let (status, a) = call(&app, get("/api/trial/random?seed=9")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = call(&app, get("/api/trial/random?seed=9")).await;
    assert_eq!(a, b);
    let trial: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(trial["samples"].as_array().unwrap().len(), 100);
    // Falls back to the configured seed.
    let (_, c) = call(&app, get("/api/trial/random")).await;
    let (_, d) = call(&app, get("/api/trial/random?seed=7")).await;
    assert_eq!(c, d);
}

#[tokio::test]
async fn telemetry_is_appended_and_summarized() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let events = [
        r#"{"session_id":"s1","interface_mode":"active","kind":"hover_start","target":"density","value":"","at_ms":1000}"#,
        r#"{"session_id":"s1","interface_mode":"active","kind":"hover_end","target":"density","value":"","at_ms":15500}"#,
        r#"{"session_id":"s1","interface_mode":"active","kind":"decision","target":"none","value":"salt","at_ms":16000}"#,
    ];
    for (i, e) in events.iter().enumerate() {
        let (status, body) = call(&app, post(e)).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{body}");
        let ack: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(ack["sequence"], i + 1);
    }

    let (status, body) = call(
        &app,
        post(r#"{"session_id":"s1","interface_mode":"active","kind":"decision","target":"none","value":"maybe","at_ms":1}"#),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(err["field"], "value");

    let log = std::fs::read_to_string(dir.path().join("t.ndjson")).unwrap();
    let kinds: Vec<Value> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["kind"].clone())
        .collect();
    assert_eq!(kinds, vec!["hover_start", "hover_end", "decision"]);

    let (status, body) = call(&app, get("/api/telemetry/summary")).await;
    assert_eq!(status, StatusCode::OK);
    let summary: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(
        summary["modes"]["active"]["hover_duration_mean_s"]["density"],
        14.5
    );
    assert_eq!(summary["modes"]["active"]["decision_counts"]["salt"], 1);
}

#[tokio::test]
async fn serves_index_page() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = call(&app(&dir), get("/")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("/api/trials"));
}

#[tokio::test]
async fn serves_ui_dir_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<p>ui build</p>").unwrap();
    let trials = generate_trials(1, 1, DEFAULT_MEAN_RANGE, DEFAULT_SD_RANGE).unwrap();
    let state = AppState::new(
        trials,
        &EngineConfig::default(),
        &dir.path().join("t.ndjson"),
        None,
    )
    .unwrap();
    let app = router(Arc::new(state), Some(ui.path().to_path_buf()));
    let (status, body) = call(&app, get("/")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "<p>ui build</p>");
    let (status, _) = call(&app, get("/api/trials")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn concurrent_posts_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let tasks: Vec<_> = (0..32)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                let e = format!(
                    r#"{{"session_id":"s{}","interface_mode":"passive","kind":"replay","target":"none","value":"","at_ms":{i}}}"#,
                    i % 4
                );
                call(&app, post(&e)).await.0
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::ACCEPTED);
    }
    let log = std::fs::read_to_string(dir.path().join("t.ndjson")).unwrap();
    assert_eq!(log.lines().count(), 32);
    let (_, body) = call(&app, get("/api/telemetry/summary")).await;
    let summary: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(summary["modes"]["passive"]["replay_count_mean"], 8.0);
}
