//! HTTP API used by the annotation front end.
//!
//! All state lives in a session directory: `session.json` (ID, revision,
//! stacks, defaults) next to the annotations, seeds, furrow line, mask and
//! peels. Every mutation carries the revision the client last saw; a stale
//! revision gets 409 and nothing changes, otherwise the revision goes up by
//! one and the files are replaced atomically.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cellpeel_core::masking::AnnotationSet;
use cellpeel_core::peel::{load_peel, rectify, save_peel, FurrowLine, PeelImage, PeelLayout};
use cellpeel_core::segment2d::{edit_seeds, h_minima_seeds, label_boundaries, SegParams, SeedSet};
use cellpeel_core::shells::ShellParams;
use cellpeel_core::volume_io::{load_mask, save_mask, save_stack};
use cellpeel_core::{Image2, IntensityVolume};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::cli::ServeArgs;
use crate::commands::Settings;
use crate::config::resolve_inputs;
use crate::error::{CliError, OrCli};
use crate::ops::{self, Surface};
use crate::render;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: CliError,
    revision: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, error: CliError::usage(message), revision: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn stale(current: u64, sent: u64) -> Self {
        let mut e = Self::new(StatusCode::CONFLICT, format!("revision {sent} is stale, current is {current}"));
        e.revision = Some(current);
        e
    }
}

impl From<CliError> for ApiError {
    fn from(error: CliError) -> Self {
        let status = if error.module == "pipeline-cli" {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        Self { status, error, revision: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.error });
        if let Some(r) = self.revision {
            body["revision"] = json!(r);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub t: f64,
    pub tol: f64,
    pub h: f64,
    pub connectivity: u8,
}

impl Defaults {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let sp = s.shell_params(None, None)?;
        let seg = s.seg_params(None, None, false)?;
        Ok(Self { t: sp.t, tol: sp.tol, h: seg.h, connectivity: seg.connectivity })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub id: String,
    pub revision: u64,
    pub stacks: Vec<PathBuf>,
    #[serde(default)]
    pub spacing: Option<[f64; 3]>,
    pub defaults: Defaults,
}

struct Inner {
    file: SessionFile,
    cache: HashMap<usize, Arc<IntensityVolume>>,
}

pub struct AppState {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

fn frame_name(prefix: &str, f: usize, ext: &str) -> String {
    format!("{prefix}_{f:03}.{ext}")
}

impl AppState {
    /// Opens the session in `dir`, creating it when absent. Non-empty
    /// `stacks` replace the stored list.
    pub fn open(dir: &Path, stacks: Vec<PathBuf>, settings: &Settings) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let sp = dir.join("session.json");
        let mut file = if sp.exists() {
            ops::read_json::<SessionFile>(&sp)?
        } else {
            if stacks.is_empty() {
                return Err(CliError::usage("a new session needs --stack"));
            }
            SessionFile {
                id: uuid::Uuid::new_v4().to_string(),
                revision: 0,
                stacks: Vec::new(),
                spacing: None,
                defaults: Defaults::from_settings(settings)?,
            }
        };
        if !stacks.is_empty() && stacks != file.stacks {
            if !file.stacks.is_empty() {
                file.revision += 1;
            }
            file.stacks = stacks;
        }
        if settings.spacing.is_some() {
            file.spacing = settings.spacing;
        }
        for p in &file.stacks {
            if !p.exists() {
                return Err(CliError::usage(format!("stack {} does not exist", p.display())));
            }
        }
        ops::write_json(&sp, &file)?;
        let state = Self { dir: dir.to_path_buf(), inner: Mutex::new(Inner { file, cache: HashMap::new() }) };
        Ok(state)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn peel_path(&self, f: usize, rectified: bool) -> PathBuf {
        self.path(&frame_name(if rectified { "rectified" } else { "peel" }, f, "tif"))
    }

    fn seeds_path(&self, f: usize) -> PathBuf {
        self.path(&frame_name("seeds", f, "json"))
    }
}

impl Inner {
    fn frames(&self) -> usize {
        self.file.stacks.len()
    }

    fn check_frame(&self, f: usize) -> ApiResult<()> {
        if f >= self.frames() {
            return Err(ApiError::not_found(format!("frame {f} outside [0, {})", self.frames())));
        }
        Ok(())
    }

    fn check_revision(&self, sent: u64) -> ApiResult<()> {
        if sent != self.file.revision {
            return Err(ApiError::stale(self.file.revision, sent));
        }
        Ok(())
    }

    fn stack(&mut self, f: usize) -> ApiResult<Arc<IntensityVolume>> {
        self.check_frame(f)?;
        if let Some(v) = self.cache.get(&f) {
            return Ok(v.clone());
        }
        let v = Arc::new(ops::load_raw(&self.file.stacks[f], self.file.spacing)?);
        self.cache.insert(f, v.clone());
        Ok(v)
    }

    fn bump(&mut self, dir: &Path) -> ApiResult<u64> {
        self.file.revision += 1;
        ops::write_json(&dir.join("session.json"), &self.file)?;
        Ok(self.file.revision)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/slice/{axis}/{index}", get(get_slice))
        .route("/api/annotations", get(get_annotations).put(put_annotations))
        .route("/api/mask/build", post(build_mask))
        .route("/api/peel/build", post(build_peel))
        .route("/api/peel/{frame}", get(get_peel))
        .route("/api/peel/{frame}/info", get(get_peel_info))
        .route("/api/seeds/{frame}", get(get_seeds).put(put_seeds))
        .route("/api/segment/{frame}/preview", post(preview))
        .route("/api/furrow", get(get_furrow).put(put_furrow))
        .route("/api/rectify", post(post_rectify))
        .with_state(state)
}

fn frames_with(state: &AppState, n: usize, rectified: bool) -> Vec<usize> {
    (0..n).filter(|&f| ops_peel_exists(&state.peel_path(f, rectified))).collect()
}

fn ops_peel_exists(path: &Path) -> bool {
    cellpeel_core::peel::peel_sidecar_path(path).exists()
}

async fn get_session(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let mut inner = st.inner.lock().await;
    let n = inner.frames();
    let stack = inner.stack(0)?;
    Ok(Json(json!({
        "id": inner.file.id,
        "revision": inner.file.revision,
        "frames": n,
        "stacks": inner.file.stacks,
        "dims": stack.grid.meta.dims,
        "spacing": stack.grid.meta.spacing,
        "bit_depth": stack.depth.bits(),
        "defaults": inner.file.defaults,
        "annotations": st.path("annotations.json").exists(),
        "mask": st.path("mask.tif").exists(),
        "furrow": st.path("furrow.json").exists(),
        "peels": frames_with(&st, n, false),
        "rectified": frames_with(&st, n, true),
    })))
}

#[derive(Debug, Deserialize)]
struct SliceQuery {
    #[serde(default)]
    frame: usize,
    min: Option<f64>,
    max: Option<f64>,
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

/// Cross-section of a raw stack: `y` gives rows z and columns x, `z` rows y
/// and columns x, `x` rows z and columns y.
fn cross_section(v: &IntensityVolume, axis: &str, index: usize) -> ApiResult<Image2<f64>> {
    let g = &v.grid;
    let [nx, ny, nz] = g.meta.dims;
    let (w, h, n) = match axis {
        "x" => (ny, nz, nx),
        "y" => (nx, nz, ny),
        "z" => (nx, ny, nz),
        _ => return Err(ApiError::bad_request(format!("axis must be x, y or z, got {axis:?}"))),
    };
    if index >= n {
        return Err(ApiError::not_found(format!("{axis} index {index} outside [0, {n})")));
    }
    let mut img = Image2::filled(w, h, 0.0);
    for r in 0..h {
        for c in 0..w {
            let (x, y, z) = match axis {
                "x" => (index, c, r),
                "y" => (c, index, r),
                _ => (c, r, index),
            };
            img.set(r, c, *g.get(x, y, z) as f64);
        }
    }
    Ok(img)
}

fn range(min: Option<f64>, max: Option<f64>) -> ApiResult<Option<(f64, f64)>> {
    match (min, max) {
        (Some(a), Some(b)) if b > a => Ok(Some((a, b))),
        (Some(_), Some(_)) => Err(ApiError::bad_request("max must exceed min")),
        (None, None) => Ok(None),
        _ => Err(ApiError::bad_request("give both min and max or neither")),
    }
}

async fn get_slice(
    State(st): State<Arc<AppState>>,
    UrlPath((axis, index)): UrlPath<(String, usize)>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<Response> {
    let win = range(q.min, q.max)?;
    let stack = st.inner.lock().await.stack(q.frame)?;
    let img = cross_section(&stack, &axis, index)?;
    Ok(png_response(render::render_image(&img, None, win)?))
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationsBody {
    revision: u64,
    annotations: AnnotationSet,
}

async fn get_annotations(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let inner = st.inner.lock().await;
    let p = st.path("annotations.json");
    let anns: Option<AnnotationSet> = if p.exists() { Some(ops::read_json(&p)?) } else { None };
    Ok(Json(json!({"revision": inner.file.revision, "annotations": anns})))
}

async fn put_annotations(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: AnnotationsBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    let dims = inner.stack(0)?.grid.meta.dims;
    req.annotations.validate().cli()?;
    if req.annotations.dims != dims {
        return Err(CliError::new("masking", format!("annotations are for {:?}, stack is {dims:?}", req.annotations.dims)).into());
    }
    ops::write_json(&st.path("annotations.json"), &req.annotations)?;
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "annotations": req.annotations})))
}

#[derive(Debug, Deserialize)]
struct RevisionBody {
    revision: u64,
}

async fn build_mask(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: RevisionBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    let p = st.path("annotations.json");
    if !p.exists() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no annotations saved yet"));
    }
    let anns: AnnotationSet = ops::read_json(&p)?;
    let raw0 = inner.stack(0)?;
    let (mask, _) = ops::build_mask(&raw0, &anns)?;
    save_mask(&mask, &st.path("mask.tif")).cli()?;
    for f in 0..inner.frames() {
        let raw = inner.stack(f)?;
        let masked = cellpeel_core::masking::apply_mask_with_margin(&raw, &mask).cli()?;
        save_stack(&masked, &st.path(&frame_name("masked", f, "tif"))).cli()?;
    }
    let fg = mask.data.iter().filter(|&&b| b).count();
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "foreground": fg, "frames": inner.frames()})))
}

#[derive(Debug, Deserialize)]
struct PeelBuildBody {
    revision: u64,
    #[serde(default)]
    surface: Surface,
    t: Option<f64>,
    tol: Option<f64>,
    frame: Option<usize>,
}

async fn build_peel(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: PeelBuildBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    let mp = st.path("mask.tif");
    if !mp.exists() {
        return Err(ApiError::new(StatusCode::CONFLICT, "build the mask first"));
    }
    let mask = load_mask(&mp).cli()?;
    let d = &inner.file.defaults;
    let params = ShellParams::new(req.t.unwrap_or(d.t), req.tol.unwrap_or(d.tol)).cli()?;
    let frames: Vec<usize> = match req.frame {
        Some(f) => {
            inner.check_frame(f)?;
            vec![f]
        }
        None => (0..inner.frames()).collect(),
    };
    let mut built = Vec::new();
    for f in frames {
        let raw = inner.stack(f)?;
        let (peel, report) = ops::build_peel(&mask, &raw, req.surface, &params, true)?;
        save_peel(&peel, &st.peel_path(f, false), PeelLayout::Combined).cli()?;
        built.push(json!({
            "frame": f,
            "width": peel.width,
            "height": peel.height,
            "thinned": report.peel.thinned.iter().sum::<usize>(),
        }));
    }
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "peels": built})))
}

fn read_peel(st: &AppState, f: usize, rectified: bool) -> ApiResult<PeelImage> {
    let p = st.peel_path(f, rectified);
    if !ops_peel_exists(&p) {
        let what = if rectified { "rectified peel" } else { "peel" };
        return Err(ApiError::not_found(format!("no {what} for frame {f}")));
    }
    Ok(load_peel(&p).cli()?)
}

#[derive(Debug, Deserialize)]
struct PeelQuery {
    #[serde(default)]
    rectified: bool,
    min: Option<f64>,
    max: Option<f64>,
}

async fn get_peel(
    State(st): State<Arc<AppState>>,
    UrlPath(frame): UrlPath<usize>,
    Query(q): Query<PeelQuery>,
) -> ApiResult<Response> {
    let win = range(q.min, q.max)?;
    let _guard = st.inner.lock().await;
    let peel = read_peel(&st, frame, q.rectified)?;
    let dom = ops::peel_domain(&peel);
    Ok(png_response(render::render_image(&peel.intensity, Some(&dom), win)?))
}

async fn get_peel_info(
    State(st): State<Arc<AppState>>,
    UrlPath(frame): UrlPath<usize>,
    Query(q): Query<PeelQuery>,
) -> ApiResult<Json<Value>> {
    let _guard = st.inner.lock().await;
    let peel = read_peel(&st, frame, q.rectified)?;
    Ok(Json(json!({
        "frame": frame,
        "width": peel.width,
        "height": peel.height,
        "row_len": peel.row_len,
        "first_slice": peel.first_slice,
        "pixel_size": peel.pixel_size,
    })))
}

fn seg_params(d: &Defaults, h: Option<f64>, connectivity: Option<u8>, invert: bool) -> ApiResult<SegParams> {
    let p = SegParams { h: h.unwrap_or(d.h), connectivity: connectivity.unwrap_or(d.connectivity), invert };
    p.validate().cli()?;
    Ok(p)
}

fn stored_seeds(st: &AppState, f: usize) -> ApiResult<Option<SeedSet>> {
    let p = st.seeds_path(f);
    if p.exists() {
        Ok(Some(ops::read_json(&p)?))
    } else {
        Ok(None)
    }
}

/// Filled peel intensities, the segmentation domain, and automatic seeds.
fn auto_seeds(peel: &PeelImage, p: &SegParams) -> ApiResult<SeedSet> {
    let filled = cellpeel_core::peel::fill_holes(peel);
    let dom = ops::peel_domain(&filled);
    Ok(h_minima_seeds(&filled.intensity, Some(&dom), p).cli()?)
}

#[derive(Debug, Deserialize)]
struct SeedsQuery {
    h: Option<f64>,
}

async fn get_seeds(
    State(st): State<Arc<AppState>>,
    UrlPath(frame): UrlPath<usize>,
    Query(q): Query<SeedsQuery>,
) -> ApiResult<Json<Value>> {
    let inner = st.inner.lock().await;
    inner.check_frame(frame)?;
    if let Some(s) = stored_seeds(&st, frame)? {
        return Ok(Json(json!({"revision": inner.file.revision, "stored": true, "seeds": s})));
    }
    let peel = read_peel(&st, frame, false)?;
    let p = seg_params(&inner.file.defaults, q.h, None, false)?;
    let seeds = auto_seeds(&peel, &p)?;
    Ok(Json(json!({"revision": inner.file.revision, "stored": false, "h": p.h, "seeds": seeds})))
}

#[derive(Debug, Deserialize)]
struct SeedEdit {
    #[serde(default)]
    add: Vec<[usize; 2]>,
    #[serde(default)]
    remove: Vec<u32>,
}

#[derive(Debug, Deserialize)]
struct SeedsBody {
    revision: u64,
    seeds: Option<SeedSet>,
    edit: Option<SeedEdit>,
    /// h for the automatic seeds an edit starts from when none are stored.
    h: Option<f64>,
}

async fn put_seeds(State(st): State<Arc<AppState>>, UrlPath(frame): UrlPath<usize>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: SeedsBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    inner.check_frame(frame)?;
    let peel = read_peel(&st, frame, false)?;
    let seeds = match (req.seeds, req.edit) {
        (Some(s), None) => s,
        (None, Some(e)) => {
            let base = match stored_seeds(&st, frame)? {
                Some(s) => s,
                None => auto_seeds(&peel, &seg_params(&inner.file.defaults, req.h, None, false)?)?,
            };
            edit_seeds(&base, &e.add, &e.remove, peel.width, peel.height).cli()?
        }
        _ => return Err(ApiError::bad_request("send exactly one of \"seeds\" or \"edit\"")),
    };
    seeds.validate(peel.width, peel.height).cli()?;
    if let Some(s) = seeds.seeds.iter().find(|s| !peel.in_domain(s.row, s.col)) {
        return Err(CliError::new("segment2d", format!("seed {} at ({}, {}) lies on peel padding", s.label, s.row, s.col)).into());
    }
    ops::write_json(&st.seeds_path(frame), &seeds)?;
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "seeds": seeds})))
}

#[derive(Debug, Default, Deserialize)]
struct PreviewBody {
    h: Option<f64>,
    connectivity: Option<u8>,
    #[serde(default)]
    invert: bool,
    /// Ignore stored seeds and use automatic ones.
    #[serde(default)]
    auto: bool,
}

async fn preview(State(st): State<Arc<AppState>>, UrlPath(frame): UrlPath<usize>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: PreviewBody = if body.is_empty() { PreviewBody::default() } else { parse_body(&body)? };
    let inner = st.inner.lock().await;
    inner.check_frame(frame)?;
    let p = seg_params(&inner.file.defaults, req.h, req.connectivity, req.invert)?;
    let peel = cellpeel_core::peel::fill_holes(&read_peel(&st, frame, false)?);
    let given = if req.auto { None } else { stored_seeds(&st, frame)? };
    let dom = ops::peel_domain(&peel);
    let (seeds, labels) = ops::segment(&peel.intensity, Some(&dom), given, &p)?;
    let count = labels.data.iter().copied().filter(|&l| l != 0).collect::<BTreeSet<_>>().len();
    Ok(Json(json!({
        "frame": frame,
        "revision": inner.file.revision,
        "h": p.h,
        "label_count": count,
        "seeds": seeds,
        "labels": {"width": labels.width, "height": labels.height, "data": labels.data},
        "boundaries": label_boundaries(&labels),
    })))
}

async fn get_furrow(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let inner = st.inner.lock().await;
    let p = st.path("furrow.json");
    let furrow: Option<FurrowLine> = if p.exists() { Some(cellpeel_core::peel::load_furrow(&p).cli()?) } else { None };
    Ok(Json(json!({"revision": inner.file.revision, "furrow": furrow})))
}

#[derive(Debug, Deserialize)]
struct FurrowBody {
    revision: u64,
    furrow: FurrowLine,
}

async fn put_furrow(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: FurrowBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    req.furrow.validate().cli()?;
    cellpeel_core::peel::save_furrow(&req.furrow, &st.path("furrow.json")).cli()?;
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "furrow": req.furrow})))
}

#[derive(Debug, Deserialize)]
struct RectifyBody {
    revision: u64,
    frame: Option<usize>,
}

async fn post_rectify(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: RectifyBody = parse_body(&body)?;
    let mut inner = st.inner.lock().await;
    inner.check_revision(req.revision)?;
    let fp = st.path("furrow.json");
    if !fp.exists() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no furrow line saved yet"));
    }
    let furrow = cellpeel_core::peel::load_furrow(&fp).cli()?;
    let frames: Vec<usize> = match req.frame {
        Some(f) => {
            inner.check_frame(f)?;
            vec![f]
        }
        None => frames_with(&st, inner.frames(), false),
    };
    if frames.is_empty() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no peels built yet"));
    }
    let mut done = Vec::new();
    for f in frames {
        let peel = read_peel(&st, f, false)?;
        let out = rectify(&peel, &furrow).cli()?;
        save_peel(&out, &st.peel_path(f, true), PeelLayout::Combined).cli()?;
        done.push(f);
    }
    let revision = inner.bump(&st.dir)?;
    Ok(Json(json!({"revision": revision, "frames": done})))
}

/// Runs the server until interrupted.
pub fn serve_blocking(s: &Settings, a: ServeArgs) -> Result<(), CliError> {
    let stacks = if a.stack.is_empty() {
        s.config_inputs()?.unwrap_or_default()
    } else {
        resolve_inputs(&a.stack, a.frames)?
    };
    let state = Arc::new(AppState::open(&a.session, stacks, s)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::usage(format!("runtime: {e}")))?;
    rt.block_on(async move {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::usage(format!("bind {addr}: {e}")))?;
        log::info!("serving session {} on http://{addr}", a.session.display());
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::usage(format!("server: {e}")))
    })
}
