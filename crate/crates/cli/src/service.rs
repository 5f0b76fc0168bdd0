//! HTTP service: trials, bundles, telemetry and static UI assets.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hedgecast_core::telemetry::{self, parse_event, TelemetryError};
use hedgecast_core::trial_store::{self, select_trial, Selector, TrialSet};
use hedgecast_core::{build_bundle, EngineConfig, TelemetryLog};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

const INDEX_HTML: &str = include_str!("../assets/index.html");

pub struct AppState {
    trials: TrialSet,
    bundles: HashMap<u64, Arc<str>>,
    log_path: PathBuf,
    log: Mutex<TelemetryLog<File>>,
    default_seed: Option<u64>,
}

impl AppState {
    /// Precomputes every bundle and opens the telemetry log for appending.
    pub fn new(
        trials: TrialSet,
        config: &EngineConfig,
        log_path: &Path,
        default_seed: Option<u64>,
    ) -> anyhow::Result<Self> {
        let mut bundles = HashMap::with_capacity(trials.trials.len());
        for trial in &trials.trials {
            let bundle = build_bundle(trial, config)
                .with_context(|| format!("building bundle for trial {}", trial.trial_id))?;
            bundles.insert(trial.trial_id, Arc::from(bundle.to_json()));
        }
        let existing = match File::open(log_path) {
            Ok(f) => BufReader::new(f).lines().count(),
            Err(_) => 0,
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .with_context(|| format!("opening telemetry log {}", log_path.display()))?;
        Ok(AppState {
            trials,
            bundles,
            log_path: log_path.to_path_buf(),
            log: Mutex::new(TelemetryLog::resume(file, existing)),
            default_seed,
        })
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/trials", get(list_trials))
        .route("/api/trial/random", get(random_trial))
        .route("/api/trial/{id}/bundle", get(trial_bundle))
        .route("/api/telemetry", post(post_telemetry))
        .route("/api/telemetry/summary", get(telemetry_summary))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    }
}

pub async fn serve(state: AppState, port: u16, ui_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let app = router(Arc::new(state), ui_dir);
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn list_trials(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "trial_ids": state.trials.ids() }))
}

#[derive(Deserialize)]
struct RandomQuery {
    seed: Option<u64>,
}

async fn random_trial(
    State(state): State<Arc<AppState>>,
    Query(query): Query<RandomQuery>,
) -> Response {
    let seed = query.seed.or(state.default_seed).unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or_default()
    });
    match select_trial(&state.trials, Selector::RandomWithSeed(seed)) {
        Ok(trial) => Json(trial).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, e.to_string()),
    }
}

async fn trial_bundle(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<u64>) -> Response {
    match state.bundles.get(&id) {
        Some(json) => (
            [(header::CONTENT_TYPE, "application/json")],
            json.to_string(),
        )
            .into_response(),
        None => error(
            StatusCode::NOT_FOUND,
            trial_store::TrialError::NotFound(id).to_string(),
        ),
    }
}

async fn post_telemetry(State(state): State<Arc<AppState>>, body: String) -> Response {
    let event = match parse_event(&body) {
        Ok(event) => event,
        Err(TelemetryError::Invalid { field, reason }) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": reason, "field": field })),
            )
                .into_response()
        }
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let mut log = state.log.lock().unwrap_or_else(|p| p.into_inner());
    match log.record_event(&event) {
        Ok(ack) => (StatusCode::ACCEPTED, Json(ack)).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn telemetry_summary(State(state): State<Arc<AppState>>) -> Response {
    // Holding the writer lock keeps a half-written line out of the read.
    let _guard = state.log.lock().unwrap_or_else(|p| p.into_inner());
    let events = File::open(&state.log_path)
        .map_err(TelemetryError::from)
        .and_then(|f| telemetry::read_log(BufReader::new(f)));
    match events {
        Ok(events) => Json(telemetry::summarize_telemetry(&events)).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
