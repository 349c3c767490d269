//! HTTP API.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /api/process` | `{"text", "session_id"?}` as JSON, or a WAV with `Content-Type: audio/wav` and an optional `X-Session-Id` header | pipeline result |
//! | `GET /api/vocabulary?filter=learning\|learned` | | entries with display lines and counts |
//! | `POST /api/song` | `{"template_id"}` | `{song_id, duration_seconds, slot_words, ...}` |
//! | `GET /api/audio/{id}` | | `audio/wav` bytes |
//! | `GET /api/session/{id}` | | session record |
//! | `GET /api/templates` | | template ids with slot counts |
//! | `GET /healthz` | | provider bindings |
//!
//! Errors are `{"code", "stage", "message"}` with a matching status code.
//! Handlers run the blocking core on Tokio's blocking pool.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower::limit::GlobalConcurrencyLimitLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::app::{App, AppError, VocabFilter, MAX_UPLOAD_BYTES};
use crate::pipeline::InputPayload;

pub const SESSION_HEADER: &str = "x-session-id";

#[derive(Debug, Clone)]
pub struct RouterOptions {
    pub max_concurrent_requests: usize,
    pub cors_origin: Option<String>,
    /// Built web UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for RouterOptions {
    fn default() -> Self {
        Self {
            max_concurrent_requests: 16,
            cors_origin: None,
            static_dir: None,
        }
    }
}

struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = self.0.code(), "{}", self.0);
        }
        (status, Json(self.0.body())).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(AppError::BadRequest(message.into()))
}

type Shared = State<Arc<App>>;

async fn blocking<T: Send + 'static>(
    app: Arc<App>,
    job: impl FnOnce(&App) -> Result<T, AppError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || job(&app))
        .await
        .map_err(|e| bad_request(format!("request aborted: {e}")))?
        .map_err(ApiError)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessText {
    text: String,
    #[serde(default)]
    session_id: Option<String>,
}

async fn process(State(app): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    let (payload, session_id) = match content_type.as_str() {
        "application/json" => {
            let req: ProcessText =
                serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))?;
            if req.text.trim().is_empty() {
                return Err(bad_request("text must not be empty"));
            }
            (InputPayload::Text(req.text), req.session_id)
        }
        "audio/wav" | "audio/x-wav" | "audio/wave" => {
            let session = headers
                .get(SESSION_HEADER)
                .map(|v| v.to_str().map(str::to_owned))
                .transpose()
                .map_err(|_| bad_request("X-Session-Id must be ASCII"))?;
            (InputPayload::Audio(App::decode_upload(&body)?), session)
        }
        other => return Err(bad_request(format!("unsupported content type {other:?}"))),
    };
    let now = chrono::Utc::now();
    let result = blocking(app, move |app| app.process(payload, session_id, now)).await?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct VocabQuery {
    filter: Option<String>,
}

async fn vocabulary(State(app): Shared, Query(q): Query<VocabQuery>) -> Result<Response, ApiError> {
    let filter = match q.filter.as_deref() {
        None | Some("") | Some("all") => VocabFilter::All,
        Some("learning") => VocabFilter::Learning,
        Some("learned") => VocabFilter::Learned,
        Some(other) => return Err(bad_request(format!("unknown filter {other:?}"))),
    };
    Ok(Json(app.vocabulary(filter)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SongRequest {
    template_id: String,
}

async fn song(State(app): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: SongRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))?;
    let view = blocking(app, move |app| app.song(&req.template_id)).await?;
    Ok(Json(view).into_response())
}

async fn audio(State(app): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = blocking(app, move |app| app.audio(&id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "audio/wav"),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

async fn session(State(app): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.session(&id)?).into_response())
}

async fn templates(State(app): Shared) -> Response {
    Json(app.templates()).into_response()
}

async fn healthz(State(app): Shared) -> Response {
    Json(app.health()).into_response()
}

async fn not_found() -> ApiError {
    ApiError(AppError::Store(crate::store::StoreError::NotFound("no such route".into())))
}

pub fn router(app: Arc<App>, options: &RouterOptions) -> Router {
    let api = Router::new()
        .route("/api/process", post(process))
        .route("/api/vocabulary", get(vocabulary))
        .route("/api/song", post(song))
        .route("/api/audio/{id}", get(audio))
        .route("/api/session/{id}", get(session))
        .route("/api/templates", get(templates))
        .route("/healthz", get(healthz))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(app);
    let mut router = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    if let Some(origin) = options.cors_origin.as_deref().and_then(|o| HeaderValue::from_str(o).ok()) {
        router = router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list([origin]))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::HeaderName::from_static(SESSION_HEADER)]),
        );
    }
    router.layer(GlobalConcurrencyLimitLayer::new(options.max_concurrent_requests.max(1)))
}

/// Serves until Ctrl-C or SIGTERM.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}
