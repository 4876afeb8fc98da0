//! HTTP frontend for the transfer engine.
//!
//! Endpoints, all under `/v1`:
//! - `POST /v1/transfer`: multipart bundles (`source_*`, `ref_*`, optional
//!   `ref2_*`, each as `image`, `landmarks`, `parsing`) and a JSON `params`
//!   part; answers with the PNG and `X-Amorph-*` headers.
//! - `POST /v1/attention`: `source_*`, `ref_*` and `params` with a `pixel`;
//!   answers with the sparse row and a base64 heat map.
//! - `GET /v1/synth?seed=..`: a synthetic demo bundle.
//! - `GET /v1/health`.

mod cache;
mod error;
mod upload;

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use amorph::metrics::mean_abs_diff;
use amorph::{Engine, FieldMode, PreparedFace, RegionSet, SynthParams, TransferParams, WorkingGrid};

pub use cache::{CacheStats, FaceCache};
pub use error::ApiError;
use upload::{BundleUpload, Upload};

pub const COVERAGE_HEADER: &str = "x-amorph-coverage";
pub const DIAGNOSTICS_HEADER: &str = "x-amorph-diagnostics";
/// Mean absolute difference to the source over face pixels, in 8-bit units.
pub const DIFF_HEADER: &str = "x-amorph-mean-abs-diff";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_body_bytes: usize,
    pub grid_cap: usize,
    pub cache_capacity: usize,
    /// Allowed CORS origin; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { max_body_bytes: 16 * 1024 * 1024, grid_cap: 128, cache_capacity: 32, cors_origin: None }
    }
}

pub struct AppState {
    engine: Engine,
    config: ServiceConfig,
    cache: FaceCache,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { engine: Engine::default(), cache: FaceCache::new(config.cache_capacity), config }
    }

    pub fn cache(&self) -> &FaceCache {
        &self.cache
    }

    fn prepare(&self, upload: &BundleUpload, bundle: &amorph::FaceBundle, grid: WorkingGrid, mode: FieldMode) -> Result<Arc<PreparedFace>, ApiError> {
        let key = FaceCache::key(&upload.parts(), grid, mode);
        self.cache
            .get_or_prepare(key, || self.engine.prepare(bundle, grid, mode))
            .map_err(|e| ApiError::engine(e, Some(upload.prefix)))
    }

    fn check_grid(&self, grid: usize) -> Result<WorkingGrid, ApiError> {
        if grid > self.config.grid_cap {
            return Err(ApiError::bad_request(
                "grid_too_large",
                Some("grid"),
                format!("grid {grid} exceeds the server cap of {}", self.config.grid_cap),
            ));
        }
        WorkingGrid::square(grid).map_err(|e| ApiError::engine(e, Some("grid")))
    }
}

pub fn router(config: ServiceConfig) -> Router {
    router_with_state(Arc::new(AppState::new(config)))
}

pub fn router_with_state(state: Arc<AppState>) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(AllowOrigin::exact(v)),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(AllowOrigin::any()),
    }
    .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
    .allow_headers([header::CONTENT_TYPE])
    .expose_headers([
        HeaderName::from_static(COVERAGE_HEADER),
        HeaderName::from_static(DIAGNOSTICS_HEADER),
        HeaderName::from_static(DIFF_HEADER),
    ]);
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/transfer", post(transfer))
        .route("/v1/attention", post(attention))
        .route("/v1/synth", get(synth))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
    grid: GridInfo,
    cache: CacheStats,
}

#[derive(Serialize)]
struct GridInfo {
    default: usize,
    max: usize,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        grid: GridInfo { default: TransferParams::default().grid, max: state.config.grid_cap },
        cache: state.cache.stats(),
    })
}

async fn transfer(State(state): State<Arc<AppState>>, multipart: Multipart) -> Result<Response, ApiError> {
    let upload = Upload::read(multipart).await?;
    let params: TransferParams = upload.params()?;
    let source_up = upload.require_bundle("source")?;
    let refs_up: Vec<BundleUpload> =
        std::iter::once(upload.require_bundle("ref")?).chain(upload.bundle("ref2")?).collect();
    params.validate(refs_up.len())?;
    let grid = state.check_grid(params.grid)?;

    let (png, coverage, diagnostics, diff) = blocking(move || {
        let source = source_up.decode()?;
        let refs = refs_up.iter().map(|u| u.decode().map(|b| (u, b))).collect::<Result<Vec<_>, _>>()?;
        let prepared_source = state.prepare(&source_up, &source, grid, params.mode)?;
        let prepared: Vec<Arc<PreparedFace>> =
            refs.iter().map(|(u, b)| state.prepare(u, b, grid, params.mode)).collect::<Result<_, _>>()?;
        let views: Vec<&PreparedFace> = prepared.iter().map(|p| p.as_ref()).collect();
        let result = state.engine.transfer_prepared(&source, &prepared_source, &views, &params)?;
        let face = source.parsing().mask(RegionSet::ALL);
        let diff = mean_abs_diff(&result.output, source.image(), Some(&face))?;
        let png = amorph::io::encode_png_rgb(&result.output)?;
        Ok((png, result.coverage, result.diagnostics, diff))
    })
    .await?;

    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    let mut put = |name: &'static str, value: String| {
        if let Ok(v) = HeaderValue::from_str(&value) {
            headers.insert(HeaderName::from_static(name), v);
        }
    };
    put(COVERAGE_HEADER, format!("{coverage:.6}"));
    put(DIAGNOSTICS_HEADER, serde_json::to_string(&diagnostics).unwrap_or_default());
    put(DIFF_HEADER, format!("{:.4}", 255.0 * diff.iter().sum::<f64>() / 3.0));
    Ok((headers, png).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttentionParams {
    /// `[row, col]` on the working grid.
    pixel: [usize; 2],
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_w")]
    w: f64,
    #[serde(default)]
    mode: FieldMode,
    #[serde(default)]
    zero_features: bool,
}

fn default_grid() -> usize {
    TransferParams::default().grid
}

fn default_w() -> f64 {
    TransferParams::default().w
}

#[derive(Debug, Serialize)]
struct AttentionResponse {
    #[serde(flatten)]
    row: amorph::amm::SparseRow,
    w: f64,
    sum: f64,
    argmax: Option<[usize; 2]>,
    /// Heat map over the reference grid, grayscale PNG.
    heatmap_png_base64: String,
}

async fn attention(State(state): State<Arc<AppState>>, multipart: Multipart) -> Result<Json<AttentionResponse>, ApiError> {
    let upload = Upload::read(multipart).await?;
    let params: AttentionParams = upload.params()?;
    if !params.w.is_finite() || params.w < 0.0 {
        return Err(amorph::Error::InvalidWeight(params.w).into());
    }
    let grid = state.check_grid(params.grid)?;
    let (source_up, ref_up) = (upload.require_bundle("source")?, upload.require_bundle("ref")?);
    let response = blocking(move || {
        let (source, reference) = (source_up.decode()?, ref_up.decode()?);
        let ps = state.prepare(&source_up, &source, grid, params.mode)?;
        let pr = state.prepare(&ref_up, &reference, grid, params.mode)?;
        let pixel = (params.pixel[0], params.pixel[1]);
        let (row, heat) = state.engine.inspect_attention(&ps, &pr, pixel, params.w, params.zero_features)?;
        let png = amorph::io::encode_png_gray(heat.width, heat.height, &heat.to_gray8())?;
        Ok(AttentionResponse {
            sum: row.entries.iter().map(|e| e.2).sum(),
            argmax: heat.argmax().map(|(r, c)| [r, c]),
            w: params.w,
            row,
            heatmap_png_base64: BASE64.encode(png),
        })
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Deserialize)]
struct SynthQuery {
    #[serde(default)]
    seed: u64,
    size: Option<usize>,
    /// `r,g,b` in [0,1].
    lip: Option<String>,
}

#[derive(Debug, Serialize)]
struct SynthResponse {
    image_png_base64: String,
    landmarks: Vec<[f64; 2]>,
    parsing_png_base64: String,
}

async fn synth(Query(q): Query<SynthQuery>) -> Result<Json<SynthResponse>, ApiError> {
    let mut params = SynthParams::default();
    if let Some(size) = q.size {
        if size > 512 {
            return Err(ApiError::bad_request("invalid_request", Some("size"), "size must be at most 512"));
        }
        params.size = size;
    }
    if let Some(lip) = &q.lip {
        let v: Vec<f64> = lip.split(',').filter_map(|s| s.trim().parse().ok()).collect();
        match v.as_slice() {
            [r, g, b] if v.iter().all(|x| (0.0..=1.0).contains(x)) => params.lip = [*r, *g, *b],
            _ => return Err(ApiError::bad_request("invalid_request", Some("lip"), "lip must be r,g,b in [0,1]")),
        }
    }
    let seed = q.seed;
    let response = blocking(move || {
        let bundle: amorph::FaceBundle = amorph::synth::synth_face(seed, &params).map_err(|e| ApiError::engine(e, Some("size")))?;
        let p = bundle.parsing();
        Ok(SynthResponse {
            image_png_base64: BASE64.encode(amorph::io::encode_png_rgb(bundle.image())?),
            landmarks: bundle.landmarks().points().to_vec(),
            parsing_png_base64: BASE64.encode(amorph::io::encode_png_gray(p.width(), p.height(), &p.to_raw_labels())?),
        })
    })
    .await?;
    Ok(Json(response))
}
