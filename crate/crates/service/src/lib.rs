//! HTTP facade over the tuner, served under `/api/v1/`.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/networks` | network document | `201 {id, version}` |
//! | POST | `/networks/{id}/query` | `{evidence, target, version?}` | `{version, posterior}` |
//! | POST | `/networks/{id}/recommend` | `{evidence, constraint, version?}` | `{version, already_satisfied, recommendations}` |
//! | POST | `/networks/{id}/apply` | `{param, new_tau}` | `{version, watches}` |
//! | POST | `/networks/{id}/revert` | `{version}` | `{version}` |
//! | GET/POST | `/networks/{id}/watches` | `{evidence, target}` | `{watches}` / `{index}` |
//! | GET | `/networks/{id}/versions` | | `{versions}` |
//! | POST | `/networks/{id}/export` | | `{id, versions: [{version, document}]}` |
//! | GET | `/bounds/envelope?q0=&lo=&hi=&step=` | | `text/csv` |
//!
//! Errors are `{"error": message}` with status 400 (malformed or invalid
//! input), 404 (unknown id or version), 409 (evidence has probability
//! zero), 413 (body over 1 MiB) or 422 (parameter change rejected).

pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use belief_tuner::bounds::{self, QueryInterval};
use belief_tuner::{grammar, tuner, Event, Evidence, MetaParameterRef, Network, Recommendation};
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuid::Uuid;

pub use store::{ModelStore, StoreConfig, StoreError, WatchQuery};

pub const DEFAULT_PORT: u16 = 8374;
pub const MAX_BODY_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub store: StoreConfig,
    /// Where `export` also writes `<id>-v<version>.json` files.
    pub export_dir: Option<PathBuf>,
}

#[derive(Debug)]
struct AppState {
    store: ModelStore,
    export_dir: Option<PathBuf>,
}

type Shared = State<Arc<AppState>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn model(e: belief_tuner::Error) -> Self {
        use belief_tuner::Error as E;
        let status = match e {
            E::ZeroEvidence => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }

    /// Rejections of a parameter change itself are 422; a malformed
    /// reference stays a 400.
    fn change(e: belief_tuner::Error) -> Self {
        use belief_tuner::Error as E;
        match e {
            E::NonTunable(_) | E::OutOfRange { .. } | E::NotBinary(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            e => Self::model(e),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession => Self::new(StatusCode::NOT_FOUND, "unknown network id"),
            StoreError::UnknownVersion(v) => Self::new(
                StatusCode::NOT_FOUND,
                format!("version {v} is not in the history"),
            ),
            StoreError::TooManyWatches(k) => Self::new(
                StatusCode::CONFLICT,
                format!("at most {k} watch queries per network"),
            ),
            StoreError::Model(e) => Self::model(e),
        }
    }
}

impl From<belief_tuner::Error> for ApiError {
    fn from(e: belief_tuner::Error) -> Self {
        Self::model(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = match e.status() {
            StatusCode::PAYLOAD_TOO_LARGE => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_id(raw: &str) -> ApiResult<Uuid> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "unknown network id"))
}

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        store: ModelStore::new(config.store),
        export_dir: config.export_dir,
    });
    let api = Router::new()
        .route("/networks", post(create_network))
        .route("/networks/{id}/query", post(query))
        .route("/networks/{id}/recommend", post(recommend))
        .route("/networks/{id}/apply", post(apply))
        .route("/networks/{id}/revert", post(revert))
        .route("/networks/{id}/watches", get(list_watches).post(add_watch))
        .route("/networks/{id}/versions", get(versions))
        .route("/networks/{id}/export", post(export))
        .route("/bounds/envelope", get(envelope));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}

async fn create_network(
    State(app): Shared,
    body: Result<String, axum::extract::rejection::StringRejection>,
) -> ApiResult<Response> {
    let body = body.map_err(|e| {
        let status = match e.status() {
            StatusCode::PAYLOAD_TOO_LARGE => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.body_text())
    })?;
    let network = Network::parse(&body)?;
    let (id, version) = app.store.create(network);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": id, "version": version })),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    #[serde(default)]
    evidence: Evidence,
    target: Event,
    version: Option<u64>,
}

#[derive(Debug, Serialize)]
struct QueryResponse {
    version: u64,
    posterior: f64,
}

async fn query(
    State(app): Shared,
    Path(id): Path<String>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<Json<QueryResponse>> {
    let id = parse_id(&id)?;
    let Json(req) = body?;
    let network = app.store.snapshot(id, req.version)?;
    let posterior = belief_tuner::posterior(&network, &req.target, &req.evidence)?;
    Ok(Json(QueryResponse {
        version: network.version(),
        posterior,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    #[serde(default)]
    evidence: Evidence,
    constraint: String,
    version: Option<u64>,
}

#[derive(Debug, Serialize)]
struct RecommendResponse {
    version: u64,
    already_satisfied: bool,
    recommendations: Vec<Recommendation>,
}

async fn recommend(
    State(app): Shared,
    Path(id): Path<String>,
    body: Result<Json<RecommendRequest>, JsonRejection>,
) -> ApiResult<Json<RecommendResponse>> {
    let id = parse_id(&id)?;
    let Json(req) = body?;
    let constraint = grammar::parse_constraint(&req.constraint)?;
    let network = app.store.snapshot(id, req.version)?;
    let report = tuner::analyze(&network, &req.evidence, &constraint)?;
    Ok(Json(RecommendResponse {
        version: network.version(),
        already_satisfied: report.already_satisfied,
        recommendations: report.recommendations,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyRequest {
    param: MetaParameterRef,
    new_tau: f64,
}

/// A watch query before and after a change, with the range the change
/// could at most have moved it to.
#[derive(Debug, Serialize)]
pub struct WatchReport {
    pub evidence: Evidence,
    pub target: Event,
    pub before: Option<f64>,
    pub exact: Option<f64>,
    pub interval: Option<QueryInterval>,
    pub contained: Option<bool>,
    /// Why the other fields are missing, e.g. the evidence became impossible.
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ApplyResponse {
    version: u64,
    watches: Vec<WatchReport>,
}

fn interval_for(q: f64, old_tau: f64, new_tau: f64) -> belief_tuner::Result<QueryInterval> {
    if new_tau <= 0.0 || new_tau >= 1.0 {
        // Unbounded log-odds change: only the degenerate cases are pinned.
        if q == 0.0 || q == 1.0 {
            return bounds::query_interval(q, bounds::OddsRatioBudget::zero());
        }
        return Ok(QueryInterval {
            low: 0.0,
            high: 1.0,
            degenerate: false,
        });
    }
    bounds::query_interval(q, bounds::log_odds_distance(old_tau, new_tau)?)
}

fn watch_report(
    watch: WatchQuery,
    previous: &Network,
    current: &Network,
    old_tau: f64,
    new_tau: f64,
) -> WatchReport {
    let mut report = WatchReport {
        evidence: watch.evidence,
        target: watch.target,
        before: None,
        exact: None,
        interval: None,
        contained: None,
        error: None,
    };
    let outcome = (|| -> belief_tuner::Result<()> {
        let before = belief_tuner::posterior(previous, &report.target, &report.evidence)?;
        report.before = Some(before);
        let interval = interval_for(before, old_tau, new_tau)?;
        report.interval = Some(interval);
        let exact = belief_tuner::posterior(current, &report.target, &report.evidence)?;
        report.exact = Some(exact);
        // Rounding can put an exact value a hair outside a tight interval.
        report.contained = Some(interval.low - 1e-12 <= exact && exact <= interval.high + 1e-12);
        Ok(())
    })();
    if let Err(e) = outcome {
        report.error = Some(e.to_string());
    }
    report
}

async fn apply(
    State(app): Shared,
    Path(id): Path<String>,
    body: Result<Json<ApplyRequest>, JsonRejection>,
) -> ApiResult<Json<ApplyResponse>> {
    let id = parse_id(&id)?;
    let Json(req) = body?;
    let applied = app
        .store
        .apply(id, &req.param, req.new_tau)
        .map_err(|e| match e {
            StoreError::Model(e) => ApiError::change(e),
            e => e.into(),
        })?;
    let loc = applied.previous.locate(&req.param)?;
    let old_tau = applied.previous.tau(loc);
    let new_tau = applied.current.tau(loc);
    let watches = applied
        .watches
        .into_iter()
        .map(|w| watch_report(w, &applied.previous, &applied.current, old_tau, new_tau))
        .collect();
    Ok(Json(ApplyResponse {
        version: applied.current.version(),
        watches,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevertRequest {
    version: u64,
}

async fn revert(
    State(app): Shared,
    Path(id): Path<String>,
    body: Result<Json<RevertRequest>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_id(&id)?;
    let Json(req) = body?;
    let network = app.store.revert(id, req.version)?;
    Ok(Json(json!({ "version": network.version() })))
}

async fn add_watch(
    State(app): Shared,
    Path(id): Path<String>,
    body: Result<Json<WatchQuery>, JsonRejection>,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let Json(watch) = body?;
    // Reject names that do not resolve now rather than on every apply.
    let network = app.store.snapshot(id, None)?;
    watch.target.resolve(&network)?;
    watch.evidence.resolve(&network)?;
    let index = app.store.add_watch(id, watch)?;
    Ok((StatusCode::CREATED, Json(json!({ "index": index }))).into_response())
}

async fn list_watches(
    State(app): Shared,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_id(&id)?;
    Ok(Json(json!({ "watches": app.store.watches(id)? })))
}

async fn versions(
    State(app): Shared,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_id(&id)?;
    Ok(Json(json!({ "versions": app.store.versions(id)? })))
}

async fn export(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_id(&id)?;
    let history = app.store.history(id)?;
    if let Some(dir) = &app.export_dir {
        for network in &history {
            let path = dir.join(format!("{id}-v{}.json", network.version()));
            std::fs::write(&path, network.serialize()).map_err(|e| {
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    format!("writing {}: {e}", path.display()),
                )
            })?;
        }
    }
    let versions: Vec<_> = history
        .iter()
        .map(|n| json!({ "version": n.version(), "document": n.to_document() }))
        .collect();
    Ok(Json(json!({ "id": id, "versions": versions })))
}

#[derive(Debug, Deserialize)]
struct EnvelopeParams {
    q0: f64,
    lo: f64,
    hi: f64,
    step: f64,
}

async fn envelope(params: Result<Query<EnvelopeParams>, QueryRejection>) -> ApiResult<Response> {
    let Query(p) = params?;
    if !(p.step > 0.0 && p.step < 1.0) {
        return Err(ApiError::bad_request(format!(
            "step {} must lie in (0, 1)",
            p.step
        )));
    }
    let grid = bounds::probability_grid(p.step)?;
    let points = bounds::envelope(p.q0, p.lo, p.hi, &grid)?;
    Ok((
        [(header::CONTENT_TYPE, "text/csv")],
        bounds::envelope_csv(&points),
    )
        .into_response())
}
