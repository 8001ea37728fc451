//! HTTP facade over the analysis engine.
//!
//! Compute endpoints are pure functions of their request. Responses use the
//! same rendering path as the CLI, so both emit identical bytes.

mod store;

use std::env;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use dpnav_core::advisor::{self, PrivacyFirstRequest, UtilityFirstRequest};
use dpnav_core::api::{
    self, envelope, render_json, Params, PosteriorRequest, PowerRequest, RiskRequest,
    SimulateRequest, TradeoffRequest,
};
use dpnav_core::{Error, ErrorCategory};

pub use store::{derived_id, valid_id, ScenarioEntry, ScenarioStore, StoreError};

/// Simulations above this many trials (including calibration) are refused.
pub const MAX_SERVICE_TRIALS: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub port: u16,
    pub store_path: PathBuf,
    pub static_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: 8080,
            store_path: PathBuf::from("scenarios"),
            static_dir: None,
        }
    }
}

impl Config {
    /// Reads `PORT`, `STORE_PATH` and `STATIC_DIR`, falling back to defaults.
    pub fn from_env() -> Result<Self, String> {
        let mut c = Config::default();
        if let Ok(p) = env::var("PORT") {
            c.port = p.parse().map_err(|_| format!("PORT must be a port number, got '{p}'"))?;
        }
        if let Ok(p) = env::var("STORE_PATH") {
            c.store_path = p.into();
        }
        if let Ok(p) = env::var("STATIC_DIR") {
            c.static_dir = Some(p.into());
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<ScenarioStore>,
}

/// Error half of every handler.
#[derive(Debug)]
pub enum ApiError {
    Engine(Error),
    NotFound(String),
    BadRequest(String),
    Unprocessable(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    detail: &'a str,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Engine(e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidId(_) => ApiError::BadRequest(e.to_string()),
            StoreError::NotFound(_) => ApiError::NotFound(e.to_string()),
            StoreError::Io(_) | StoreError::Corrupt(_) => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::Engine(e) => {
                let status = match e.category() {
                    ErrorCategory::Validation => StatusCode::BAD_REQUEST,
                    ErrorCategory::Infeasible => StatusCode::UNPROCESSABLE_ENTITY,
                };
                (status, api::render_error(e))
            }
            ApiError::NotFound(d) => (StatusCode::NOT_FOUND, error_json("not_found", d)),
            ApiError::BadRequest(d) => (StatusCode::BAD_REQUEST, error_json("bad_request", d)),
            ApiError::Unprocessable(d) => {
                (StatusCode::UNPROCESSABLE_ENTITY, error_json("too_large", d))
            }
            ApiError::Internal(d) => {
                log::error!("internal error: {d}");
                (StatusCode::INTERNAL_SERVER_ERROR, error_json("internal", d))
            }
        };
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn error_json(code: &str, detail: &str) -> String {
    render_json(&ErrorBody { error: code, detail })
}

type ApiResult = Result<Response, ApiError>;

fn json(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn csv(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Splits off `format` and builds the strict parameter set.
fn query_params(
    q: Result<Query<Vec<(String, String)>>, QueryRejection>,
) -> Result<(Params, Format), ApiError> {
    let Query(pairs) = q.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let mut format = Format::Json;
    let mut rest = Vec::with_capacity(pairs.len());
    for (k, v) in pairs {
        if k == "format" {
            format = match v.as_str() {
                "json" => Format::Json,
                "csv" => Format::Csv,
                other => {
                    return Err(ApiError::BadRequest(format!(
                        "format must be json or csv, got '{other}'"
                    )))
                }
            };
        } else {
            rest.push((k, v));
        }
    }
    Ok((Params::new(rest)?, format))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Engine(Error::Configuration(format!("invalid JSON body: {e}"))))
}

async fn tradeoff(q: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let (params, format) = query_params(q)?;
    let req = TradeoffRequest::from_params(params)?;
    let resp = req.run()?;
    Ok(match format {
        Format::Json => json(render_json(&envelope(&req, &resp))),
        Format::Csv => csv(api::tradeoff_csv(&resp)),
    })
}

async fn risk(q: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let (params, format) = query_params(q)?;
    let req = RiskRequest::from_params(params)?;
    let resp = req.run()?;
    Ok(match format {
        Format::Json => json(render_json(&envelope(&req, &resp))),
        Format::Csv => csv(api::risk_csv(&req, &resp)),
    })
}

async fn posterior(q: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let (params, format) = query_params(q)?;
    let req = PosteriorRequest::from_params(params)?;
    let resp = req.run()?;
    Ok(match format {
        Format::Json => json(render_json(&envelope(&req, &resp))),
        Format::Csv => csv(api::posterior_csv(&resp)),
    })
}

async fn power(q: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let (params, format) = query_params(q)?;
    let req = PowerRequest::from_params(params)?;
    let resp = req.run()?;
    Ok(match format {
        Format::Json => json(render_json(&envelope(&req, &resp))),
        Format::Csv => csv(api::power_csv(&req, &resp)),
    })
}

async fn privacy_first(body: Bytes) -> ApiResult {
    let req: PrivacyFirstRequest = parse_body(&body)?;
    let rec = advisor::privacy_first(&req)?;
    Ok(json(render_json(&envelope(&req, &rec))))
}

async fn utility_first(body: Bytes) -> ApiResult {
    let req: UtilityFirstRequest = parse_body(&body)?;
    let rec = advisor::utility_first(&req)?;
    Ok(json(render_json(&envelope(&req, &rec))))
}

async fn simulate(body: Bytes) -> ApiResult {
    let req: SimulateRequest = parse_body(&body)?;
    let total = req.total_trials();
    if total > MAX_SERVICE_TRIALS {
        return Err(ApiError::Unprocessable(format!(
            "{total} trials exceed the interactive limit of {MAX_SERVICE_TRIALS}; \
             save the body to a file and run `dpnav simulate --input <file>` instead"
        )));
    }
    let rendered = tokio::task::spawn_blocking(move || {
        req.run().map(|resp| render_json(&envelope(&req, &resp)))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(json(rendered))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PutScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    payload: serde_json::Value,
}

#[derive(Serialize)]
struct IdEcho<'a> {
    id: &'a str,
}

async fn put_scenario(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: PutScenario = parse_body(&body)?;
    if !req.payload.is_object() {
        return Err(ApiError::BadRequest("payload must be a JSON object".into()));
    }
    let store = state.store.clone();
    let (id, payload) = (req.id.clone(), req.payload.clone());
    let entry = tokio::task::spawn_blocking(move || store.put(id.as_deref(), payload))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(json(render_json(&envelope(&req, &entry))))
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let entry = state.store.get(&id)?;
    Ok(json(render_json(&envelope(&IdEcho { id: &id }, &entry))))
}

async fn not_found() -> ApiError {
    ApiError::NotFound("no such endpoint".into())
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/tradeoff", get(tradeoff))
        .route("/api/risk", get(risk))
        .route("/api/posterior", get(posterior))
        .route("/api/utility/power", get(power))
        .route("/api/advise/privacy-first", post(privacy_first))
        .route("/api/advise/utility-first", post(utility_first))
        .route("/api/simulate", post(simulate))
        .route("/api/scenario", post(put_scenario))
        .route("/api/scenario/{id}", get(get_scenario))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

pub async fn serve(config: Config) -> io::Result<()> {
    let store = ScenarioStore::open(&config.store_path).map_err(|e| io::Error::other(e.to_string()))?;
    let app = router(
        AppState {
            store: Arc::new(store),
        },
        config.static_dir.clone(),
    );
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: Config) -> io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config))
}
