//! Local labeling service.
//!
//! | route                                   | purpose                             |
//! |-----------------------------------------|-------------------------------------|
//! | `GET  /api/images`                      | ids with the annotators that labeled them |
//! | `GET  /api/images/{id}`                 | the normalized depth map as 8-bit PNG |
//! | `POST /api/labels`                      | `{image_id, annotator, clock}`, 201 on success |
//! | `GET  /api/predict/{id}?patch_px=&dark=&diff=` | pipeline result for one image |
//! | `GET  /api/agreement?a=&b=`             | Cohen's kappa over shared images    |
//! | `GET  /api/export`                      | JSON Lines manifest of every effective label |
//!
//! When a UI directory is configured its files are served from `/`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pathfinder_core::{AgreementError, ClockDirection, SearchParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::depth_io::{encode_png, is_depth_file, load_depth_image, LoadOptions};
use crate::eval::{manifest_to_jsonl, ManifestEntry};
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::store::{LabelRecord, LabelStore, StoreError};

pub const DEFAULT_PORT: u16 = 7770;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub image_root: PathBuf,
    pub labels_path: PathBuf,
    pub pipeline: PipelineConfig,
    pub load: LoadOptions,
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("image root {path} is not readable: {source}")]
    ImageRoot {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// Image ids (file stems) mapped to files under the image root.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    root: PathBuf,
    files: BTreeMap<String, PathBuf>,
}

impl Catalog {
    pub fn scan(root: &Path) -> Result<Self, StartupError> {
        let err = |source| StartupError::ImageRoot {
            path: root.to_path_buf(),
            source,
        };
        let mut names: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_depth_file(p))
            .collect();
        names.sort();
        let mut files: BTreeMap<String, PathBuf> = BTreeMap::new();
        for path in names {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if let Some(prev) = files.get(id) {
                log::warn!(
                    "ignoring {} (id {id:?} already taken by {})",
                    path.display(),
                    prev.display()
                );
                continue;
            }
            files.insert(id.to_owned(), path);
        }
        Ok(Self {
            root: root.to_path_buf(),
            files,
        })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, id: &str) -> Option<&Path> {
        self.files.get(id).map(PathBuf::as_path)
    }

    /// Path relative to the image root, as written into exported manifests.
    pub fn relative(&self, id: &str) -> Option<String> {
        let p = self.get(id)?;
        Some(
            p.strip_prefix(&self.root)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned(),
        )
    }
}

pub struct AppState {
    pub catalog: Catalog,
    pub store: LabelStore,
    pub pipeline: PipelineConfig,
    pub load: LoadOptions,
}

impl AppState {
    pub fn open(config: &ServiceConfig) -> Result<Self, StartupError> {
        Ok(Self {
            catalog: Catalog::scan(&config.image_root)?,
            store: LabelStore::open(&config.labels_path)?,
            pipeline: config.pipeline,
            load: config.load,
        })
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("invalid clock {0:?}; expected one of 9:00, 9:30, ..., 3:00")]
    InvalidClock(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("annotators {0:?} and {1:?} have no labeled images in common")]
    NoOverlap(String, String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ApiError::UnknownImage(_) => (StatusCode::NOT_FOUND, "unknown_image"),
            ApiError::InvalidClock(_) => (StatusCode::BAD_REQUEST, "invalid_clock"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::NoOverlap(..) => (StatusCode::UNPROCESSABLE_ENTITY, "no_overlap"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let body = serde_json::json!({ "error": code, "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/images", get(list_images))
        .route("/api/images/{id}", get(image_png))
        .route("/api/labels", post(submit_label))
        .route("/api/predict/{id}", get(predict))
        .route("/api/agreement", get(agreement))
        .route("/api/export", get(export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until the task is cancelled.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), StartupError> {
    let state = Arc::new(AppState::open(&config)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::Bind { addr, source })?;
    let local = listener.local_addr().unwrap_or(addr);
    log::info!(
        "serving {} images from {} on http://{local}",
        state.catalog.files.len(),
        config.image_root.display()
    );
    axum::serve(listener, router(state, config.ui_dir.as_deref()))
        .await
        .map_err(|source| StartupError::Bind { addr, source })
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ImageEntry {
    pub image_id: String,
    pub labeled_by: Vec<String>,
}

async fn list_images(State(st): State<Arc<AppState>>) -> Json<Vec<ImageEntry>> {
    Json(
        st.catalog
            .ids()
            .map(|id| ImageEntry {
                image_id: id.to_owned(),
                labeled_by: st.store.annotators_for(id),
            })
            .collect(),
    )
}

async fn image_png(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let path = st
        .catalog
        .get(&id)
        .ok_or_else(|| ApiError::UnknownImage(id.clone()))?
        .to_path_buf();
    let load = st.load;
    let bytes = tokio::task::spawn_blocking(move || {
        load_depth_image(&path, load).map(|img| encode_png(&img))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    image_id: String,
    annotator: String,
    clock: String,
}

async fn submit_label(
    State(st): State<Arc<AppState>>,
    Json(body): Json<LabelBody>,
) -> Result<(StatusCode, Json<LabelRecord>), ApiError> {
    if st.catalog.get(&body.image_id).is_none() {
        return Err(ApiError::UnknownImage(body.image_id));
    }
    let clock: ClockDirection = body
        .clock
        .parse()
        .map_err(|_| ApiError::InvalidClock(body.clock.clone()))?;
    let annotator = body.annotator.trim();
    if annotator.is_empty() {
        return Err(ApiError::BadRequest("annotator must not be empty".into()));
    }
    let record = LabelRecord {
        image_id: body.image_id,
        annotator: annotator.to_owned(),
        clock,
    };
    let st2 = Arc::clone(&st);
    let rec2 = record.clone();
    tokio::task::spawn_blocking(move || st2.store.append(&rec2))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Debug, Deserialize, Default)]
pub struct PredictQuery {
    pub patch_px: Option<usize>,
    pub dark: Option<f64>,
    pub diff: Option<f64>,
}

async fn predict(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PredictQuery>,
) -> Result<Response, ApiError> {
    let path = st
        .catalog
        .get(&id)
        .ok_or_else(|| ApiError::UnknownImage(id.clone()))?
        .to_path_buf();
    let config = PipelineConfig {
        patch_px: q.patch_px.unwrap_or(st.pipeline.patch_px),
        search: SearchParams {
            dark_threshold: q.dark.unwrap_or(st.pipeline.search.dark_threshold),
            diff_threshold: q.diff.unwrap_or(st.pipeline.search.diff_threshold),
            ..st.pipeline.search
        },
        ..st.pipeline
    };
    let load = st.load;
    let outcome = tokio::task::spawn_blocking(move || {
        let img = load_depth_image(&path, load).map_err(|e| ApiError::Internal(e.to_string()))?;
        run_pipeline(&img, &config).map_err(|e| ApiError::BadRequest(e.to_string()))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(outcome.to_json(&id)).into_response())
}

#[derive(Debug, Deserialize)]
struct AgreementQuery {
    a: String,
    b: String,
}

async fn agreement(
    State(st): State<Arc<AppState>>,
    Query(q): Query<AgreementQuery>,
) -> Result<Response, ApiError> {
    match st.store.agreement(&q.a, &q.b) {
        Ok(report) => Ok(Json(report).into_response()),
        Err(AgreementError::Empty) => Err(ApiError::NoOverlap(q.a, q.b)),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    }
}

async fn export(State(st): State<Arc<AppState>>) -> Response {
    let entries: Vec<ManifestEntry> = st
        .store
        .records()
        .into_iter()
        .map(|r| ManifestEntry {
            path: st.catalog.relative(&r.image_id).unwrap_or_default(),
            image_id: r.image_id,
            clock: r.clock,
            annotator: r.annotator,
        })
        .collect();
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        manifest_to_jsonl(&entries),
    )
        .into_response()
}
