//! HTTP + JSON facade over exploration sessions.
//!
//! Routes live under `/api/session`. Every mutating response carries the
//! full cluster panel so a client can redraw without a second request.

mod registry;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{NaiveDate, TimeDelta};
use serde::{Deserialize, Serialize};

pub use registry::{Clock, ManualClock, SessionHandle, SessionRegistry, SessionSlot, SystemClock};

use crate::cluster::DEFAULT_SEED;
use crate::medline::{parse_medline, IngestError, IngestReport};
use crate::report::{render_cluster_html, render_titles, report_filename, TitleRow};
use crate::session::{ClusterSummary, Session, SessionConfig, SessionError, DEFAULT_K};
use crate::text::Stopwords;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TTL: Duration = Duration::from_secs(2 * 60 * 60);
pub const DEFAULT_UPLOAD_CAP: usize = 50 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub seed: u64,
    pub session_ttl: Duration,
    pub upload_cap: usize,
    pub stopwords: Arc<Stopwords>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            session_ttl: DEFAULT_TTL,
            upload_cap: DEFAULT_UPLOAD_CAP,
            stopwords: Arc::new(Stopwords::english()),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<SessionRegistry>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: ServiceConfig, clock: Arc<dyn Clock>) -> Self {
        let ttl = TimeDelta::from_std(config.session_ttl).unwrap_or(TimeDelta::MAX);
        Self { registry: Arc::new(SessionRegistry::new(ttl, clock)), config: Arc::new(config) }
    }
}

/// The cluster panel plus the controls' state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionView {
    pub k: usize,
    pub max_k: usize,
    pub document_count: usize,
    pub selected_cluster: usize,
    pub history_depth: usize,
    pub can_go_back: bool,
    pub exclude_words: Vec<String>,
    pub clusters: Vec<ClusterSummary>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        Self {
            k: s.k(),
            max_k: s.max_k(),
            document_count: s.document_count(),
            selected_cluster: s.selected_cluster(),
            history_depth: s.history_depth(),
            can_go_back: s.can_go_back(),
            exclude_words: s.exclude_words().iter().cloned().collect(),
            clusters: s.summaries(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CreatedView {
    session_id: String,
    source_name: String,
    ingest: IngestReport,
    #[serde(flatten)]
    view: SessionView,
}

#[derive(Debug, Serialize)]
struct DocumentRow {
    pmid: u64,
    date: NaiveDate,
}

#[derive(Debug, Serialize)]
struct DocumentsView {
    cluster: usize,
    documents: Vec<DocumentRow>,
}

#[derive(Debug, Serialize)]
struct SelectedView {
    #[serde(flatten)]
    view: SessionView,
    documents: Vec<DocumentRow>,
}

#[derive(Debug, Serialize)]
struct AbstractView {
    pmid: u64,
    date: NaiveDate,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    position: usize,
    total: usize,
}

#[derive(Debug, Serialize)]
struct TitlesView {
    cluster: usize,
    rows: Vec<TitleRow>,
}

#[derive(Debug, Deserialize)]
struct UpdateBody {
    k: Option<usize>,
    #[serde(default)]
    exclude_words: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SelectBody {
    cluster: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", "unknown or expired session")
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::AtRoot => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match e {
            IngestError::EmptyInput => "empty_input",
            IngestError::NoValidRecords => "no_valid_records",
        };
        Self::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let cap = state.config.upload_cap;
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/update", post(update_session))
        .route("/api/session/{id}/use-cluster", post(use_cluster))
        .route("/api/session/{id}/back", post(go_back))
        .route("/api/session/{id}/select", post(select_cluster))
        .route("/api/session/{id}/clusters", get(get_clusters))
        .route("/api/session/{id}/cluster/{c}/documents", get(get_documents))
        .route("/api/session/{id}/cluster/{c}/abstract/{position}", get(get_abstract))
        .route("/api/session/{id}/cluster/{c}/titles", get(get_titles))
        .route("/api/session/{id}/cluster/{c}/report", get(download_report))
        .layer(DefaultBodyLimit::max(cap))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let registry = state.registry.clone();
    let period = state.config.session_ttl.min(Duration::from_secs(60)).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            registry.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn bad_request(code: &'static str, message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, code, message)
}

async fn create_session(State(state): State<AppState>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut upload: Option<(String, Vec<u8>)> = None;
    let mut k: Option<usize> = None;
    let mut seed: Option<u64> = None;
    while let Some(field) =
        multipart.next_field().await.map_err(|e| ApiError::new(e.status(), "bad_multipart", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "medline" => {
                let file_name = field.file_name().unwrap_or("medline.txt").to_string();
                let bytes =
                    field.bytes().await.map_err(|e| ApiError::new(e.status(), "bad_multipart", e.body_text()))?;
                upload = Some((file_name, bytes.to_vec()));
            }
            "k" | "seed" => {
                let text = field.text().await.map_err(|e| ApiError::new(e.status(), "bad_multipart", e.body_text()))?;
                let text = text.trim();
                if text.is_empty() {
                    continue;
                }
                let parsed: u64 = text
                    .parse()
                    .map_err(|_| bad_request("bad_field", format!("field {name} must be a non-negative integer")))?;
                if name == "k" {
                    k = Some(parsed as usize);
                } else {
                    seed = Some(parsed);
                }
            }
            _ => {}
        }
    }
    let (source_name, bytes) =
        upload.ok_or_else(|| bad_request("missing_file", "multipart field `medline` is required"))?;
    let config = SessionConfig { seed: seed.unwrap_or(state.config.seed), stopwords: state.config.stopwords.clone() };

    let registry = state.registry.clone();
    let created = tokio::task::spawn_blocking(move || -> ApiResult<CreatedView> {
        let (corpus, ingest) = parse_medline(&bytes, &source_name)?;
        let k = k.unwrap_or_else(|| DEFAULT_K.min(corpus.len().saturating_sub(1)).max(1));
        let session = Session::new(corpus, k, &config)?;
        let view = SessionView::from(&session);
        let handle = registry.insert(session);
        Ok(CreatedView { session_id: handle.session_id.clone(), source_name, ingest, view })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<SessionHandle>> {
    state.registry.get(id).ok_or_else(ApiError::not_found)
}

/// Applies a mutation under the session's write lock on a blocking thread.
async fn mutate<F>(state: AppState, id: String, op: F) -> ApiResult<Json<SessionView>>
where
    F: FnOnce(&mut Session) -> Result<(), SessionError> + Send + 'static,
{
    let handle = lookup(&state, &id)?;
    let registry = state.registry.clone();
    tokio::task::spawn_blocking(move || {
        let mut slot = handle.state.write();
        op(&mut slot.session)?;
        slot.updated_at = registry.now();
        Ok(Json(SessionView::from(&slot.session)))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn update_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<UpdateBody>,
) -> ApiResult<Json<SessionView>> {
    mutate(state, id, move |s| {
        let k = body.k.unwrap_or(s.k());
        s.update(k, &body.exclude_words)
    })
    .await
}

async fn use_cluster(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    mutate(state, id, Session::use_cluster).await
}

async fn go_back(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    mutate(state, id, Session::back).await
}

fn document_rows(session: &Session, c: usize) -> ApiResult<Vec<DocumentRow>> {
    Ok(session.members(c)?.into_iter().map(|(pmid, date)| DocumentRow { pmid, date }).collect())
}

async fn select_cluster(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<SelectBody>,
) -> ApiResult<Json<SelectedView>> {
    let handle = lookup(&state, &id)?;
    let mut slot = handle.state.write();
    slot.session.select(body.cluster)?;
    let session = &slot.session;
    Ok(Json(SelectedView { view: SessionView::from(session), documents: document_rows(session, body.cluster)? }))
}

async fn get_clusters(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let handle = lookup(&state, &id)?;
    let slot = handle.state.read();
    Ok(Json(SessionView::from(&slot.session)))
}

async fn get_documents(
    State(state): State<AppState>,
    Path((id, c)): Path<(String, usize)>,
) -> ApiResult<Json<DocumentsView>> {
    let handle = lookup(&state, &id)?;
    let slot = handle.state.read();
    Ok(Json(DocumentsView { cluster: c, documents: document_rows(&slot.session, c)? }))
}

async fn get_abstract(
    State(state): State<AppState>,
    Path((id, c, position)): Path<(String, usize, usize)>,
) -> ApiResult<Json<AbstractView>> {
    let handle = lookup(&state, &id)?;
    let slot = handle.state.read();
    let records = slot.session.member_records(c)?;
    let total = records.len();
    let r = records.get(position).ok_or_else(|| {
        ApiError::new(
            StatusCode::RANGE_NOT_SATISFIABLE,
            "position_out_of_range",
            format!("position {position} is outside 0..{total}"),
        )
    })?;
    Ok(Json(AbstractView {
        pmid: r.pmid,
        date: r.date,
        title: r.title.clone(),
        abstract_text: r.abstract_str().to_string(),
        position,
        total,
    }))
}

async fn get_titles(
    State(state): State<AppState>,
    Path((id, c)): Path<(String, usize)>,
) -> ApiResult<Json<TitlesView>> {
    let handle = lookup(&state, &id)?;
    let slot = handle.state.read();
    Ok(Json(TitlesView { cluster: c, rows: render_titles(&slot.session, c)? }))
}

async fn download_report(State(state): State<AppState>, Path((id, c)): Path<(String, usize)>) -> ApiResult<Response> {
    let handle = lookup(&state, &id)?;
    let slot = handle.state.read();
    let html = render_cluster_html(&slot.session, c, slot.updated_at)?;
    let disposition = format!("attachment; filename=\"{}\"", report_filename(slot.session.source_name(), c));
    Ok((
        [(header::CONTENT_TYPE, "text/html; charset=utf-8".to_string()), (header::CONTENT_DISPOSITION, disposition)],
        html,
    )
        .into_response())
}
