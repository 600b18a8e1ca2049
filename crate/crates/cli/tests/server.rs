use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cellpeel_cli::commands::Settings;
use cellpeel_cli::ops;
use cellpeel_cli::server::{router, AppState};
use cellpeel_core::peel::load_peel;
use cellpeel_core::phantom::{cylinder_annotations, cylinder_labels, membrane_stack, CylinderSpec};
use cellpeel_core::segment2d::{SegParams, SeedSet};
use cellpeel_core::volume_io::save_stack;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn spec() -> CylinderSpec {
    CylinderSpec::new(20.5, 10.0, 16)
}

/// Two-frame phantom written to `dir/raw`; returns the stack paths.
fn write_stacks(dir: &Path) -> Vec<std::path::PathBuf> {
    let raw = dir.join("raw");
    std::fs::create_dir_all(&raw).unwrap();
    (0..2)
        .map(|f| {
            let p = raw.join(format!("stack_{f:03}.tif"));
            save_stack(&membrane_stack(&cylinder_labels(&spec(), f, 1)), &p).unwrap();
            p
        })
        .collect()
}

fn settings() -> Settings {
    let mut s = Settings::default();
    s.cfg.shell.t = Some(3.0);
    s.cfg.seg.h = Some(20.0);
    s
}

fn app(dir: &Path) -> Router {
    let stacks = write_stacks(dir);
    let state = AppState::open(&dir.join("session"), stacks, &settings()).unwrap();
    router(Arc::new(state))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b, _) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn png_dims(bytes: &[u8]) -> (u32, u32) {
    let r = png::Decoder::new(std::io::Cursor::new(bytes.to_vec())).read_info().unwrap();
    let i = r.info();
    (i.width, i.height)
}

#[tokio::test]
async fn session_reports_stacks_and_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, Method::GET, "/api/session", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["revision"], 0);
    assert_eq!(v["frames"], 2);
    assert_eq!(v["dims"], json!(spec().dims()));
    assert_eq!(v["mask"], false);
    assert_eq!(v["defaults"]["h"], 20.0);
    assert!(!v["id"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn slices_render_along_every_axis() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let [nx, ny, nz] = spec().dims().map(|d| d as u32);
    for (axis, want) in [("x", (ny, nz)), ("y", (nx, nz)), ("z", (nx, ny))] {
        let (s, b, ct) = call(&app, Method::GET, &format!("/api/slice/{axis}/3?min=0&max=255"), None).await;
        assert_eq!(s, StatusCode::OK, "{axis}");
        assert_eq!(ct, "image/png");
        assert_eq!(png_dims(&b), want);
    }
    let (s, v) = call_json(&app, Method::GET, "/api/slice/q/0", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["module"], "pipeline-cli");
    let (s, _) = call_json(&app, Method::GET, &format!("/api/slice/y/{ny}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&app, Method::GET, "/api/slice/y/0?frame=5", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&app, Method::GET, "/api/slice/y/0?min=5", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stale_revisions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let anns = cylinder_annotations(&spec(), 3);
    let (s, v) = call_json(&app, Method::PUT, "/api/annotations", Some(json!({"revision": 7, "annotations": anns}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["revision"], 0);
    let (_, v) = call_json(&app, Method::GET, "/api/annotations", None).await;
    assert_eq!(v["annotations"], Value::Null);

    let (s, v) = call_json(&app, Method::PUT, "/api/annotations", Some(json!({"revision": 0, "annotations": anns}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["revision"], 1);
    // the same write again is now stale
    let (s, _) = call_json(&app, Method::PUT, "/api/annotations", Some(json!({"revision": 0, "annotations": anns}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, v) = call_json(&app, Method::GET, "/api/annotations", None).await;
    assert_eq!(v["revision"], 1);
    assert_eq!(v["annotations"], serde_json::to_value(&anns).unwrap());
}

#[tokio::test]
async fn invalid_bodies_get_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, b, _) = call(&app, Method::PUT, "/api/annotations", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("invalid request body"));

    let mut anns = cylinder_annotations(&spec(), 3);
    anns.slices.truncate(1);
    let (s, v) = call_json(&app, Method::PUT, "/api/annotations", Some(json!({"revision": 0, "annotations": anns}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["module"], "masking");

    let (s, _) = call_json(&app, Method::POST, "/api/mask/build", Some(json!({"revision": 0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call_json(&app, Method::POST, "/api/peel/build", Some(json!({"revision": 0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call_json(&app, Method::GET, "/api/peel/0", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&app, Method::POST, "/api/rectify", Some(json!({"revision": 0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn full_session_matches_headless_run() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let session = dir.path().join("session");
    let anns = cylinder_annotations(&spec(), 3);
    let (_, v) = call_json(&app, Method::PUT, "/api/annotations", Some(json!({"revision": 0, "annotations": anns}))).await;
    let mut rev = v["revision"].as_u64().unwrap();

    let (s, v) = call_json(&app, Method::POST, "/api/mask/build", Some(json!({"revision": rev}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev = v["revision"].as_u64().unwrap();
    assert!(session.join("mask.tif").exists());
    assert!(session.join("masked_001.tif").exists());

    let (s, v) = call_json(&app, Method::POST, "/api/peel/build", Some(json!({"revision": rev, "surface": "apical"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev = v["revision"].as_u64().unwrap();
    assert_eq!(v["peels"].as_array().unwrap().len(), 2);
    assert_eq!(v["peels"][0]["thinned"], 0);

    let (s, b, ct) = call(&app, Method::GET, "/api/peel/0", None).await;
    assert_eq!((s, ct.as_str()), (StatusCode::OK, "image/png"));
    let peel = load_peel(&session.join("peel_000.tif")).unwrap();
    assert_eq!(png_dims(&b), (peel.width as u32, peel.height as u32));
    let (_, info) = call_json(&app, Method::GET, "/api/peel/0/info", None).await;
    assert_eq!(info["row_len"], json!(peel.row_len));

    // automatic seeds and preview agree with the headless segmentation
    let (_, v) = call_json(&app, Method::GET, "/api/seeds/0", None).await;
    assert_eq!(v["stored"], false);
    let auto: SeedSet = serde_json::from_value(v["seeds"].clone()).unwrap();
    let p = SegParams { h: 20.0, ..SegParams::default() };
    let (img, pl) = ops::load_2d_input(&session.join("peel_000.tif")).unwrap();
    let dom = ops::peel_domain(pl.as_ref().unwrap());
    let (seeds_cli, labels_cli) = ops::segment(&img, Some(&dom), None, &p).unwrap();
    assert_eq!(auto, seeds_cli);
    let (s, v) = call_json(&app, Method::POST, "/api/segment/0/preview", Some(json!({"h": 20.0}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let data: Vec<u32> = serde_json::from_value(v["labels"]["data"].clone()).unwrap();
    assert_eq!(data, labels_cli.data);
    assert_eq!(v["label_count"].as_u64().unwrap() as usize, seeds_cli.len());
    assert!(!v["boundaries"].as_array().unwrap().is_empty());

    // edit: drop one seed, add one manual seed
    let drop = auto.seeds[0].label;
    let add = [auto.seeds[1].row, (auto.seeds[1].col + 3) % peel.row_len[auto.seeds[1].row]];
    let (s, v) = call_json(
        &app,
        Method::PUT,
        "/api/seeds/0",
        Some(json!({"revision": rev, "edit": {"add": [add], "remove": [drop]}})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev = v["revision"].as_u64().unwrap();
    let edited: SeedSet = serde_json::from_value(v["seeds"].clone()).unwrap();
    assert_eq!(edited.len(), auto.len());
    assert!(!edited.labels().contains(&drop));
    assert_eq!(edited.max_label(), auto.max_label() + 1);
    let (_, v) = call_json(&app, Method::GET, "/api/seeds/0", None).await;
    assert_eq!(v["stored"], true);

    // stored seeds drive the preview, exactly as segment2d --seeds would
    let (_, v) = call_json(&app, Method::POST, "/api/segment/0/preview", Some(json!({"h": 20.0}))).await;
    let (_, labels_edit) = ops::segment(&img, Some(&dom), Some(edited.clone()), &p).unwrap();
    let data: Vec<u32> = serde_json::from_value(v["labels"]["data"].clone()).unwrap();
    assert_eq!(data, labels_edit.data);
    let (_, v) = call_json(&app, Method::POST, "/api/segment/0/preview", Some(json!({"h": 20.0, "auto": true}))).await;
    let data: Vec<u32> = serde_json::from_value(v["labels"]["data"].clone()).unwrap();
    assert_eq!(data, labels_cli.data);

    // seeds on padding or both forms at once are refused
    let (s, _) = call_json(&app, Method::PUT, "/api/seeds/0", Some(json!({"revision": rev, "seeds": auto, "edit": {}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mid = peel.row_len[0] as f64 / 2.0;
    let furrow = json!({"points": [[0.0, mid - 3.0], [peel.height as f64 - 1.0, mid + 3.0]]});
    let (s, v) = call_json(&app, Method::PUT, "/api/furrow", Some(json!({"revision": rev, "furrow": furrow}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev = v["revision"].as_u64().unwrap();
    let (_, v) = call_json(&app, Method::GET, "/api/furrow", None).await;
    assert_eq!(v["furrow"], furrow);
    let (s, v) = call_json(&app, Method::POST, "/api/rectify", Some(json!({"revision": rev}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev = v["revision"].as_u64().unwrap();
    assert_eq!(v["frames"], json!([0, 1]));
    let (s, _, ct) = call(&app, Method::GET, "/api/peel/1?rectified=true", None).await;
    assert_eq!((s, ct.as_str()), (StatusCode::OK, "image/png"));

    let (_, v) = call_json(&app, Method::GET, "/api/session", None).await;
    assert_eq!(v["revision"], rev);
    assert_eq!(v["peels"], json!([0, 1]));
    assert_eq!(v["rectified"], json!([0, 1]));

    // state survives a restart
    let reopened = router(Arc::new(AppState::open(&session, Vec::new(), &Settings::default()).unwrap()));
    let (_, v) = call_json(&reopened, Method::GET, "/api/session", None).await;
    assert_eq!(v["revision"], rev);
    assert_eq!(v["defaults"]["h"], 20.0);
    let (_, v) = call_json(&reopened, Method::GET, "/api/seeds/0", None).await;
    assert_eq!(serde_json::from_value::<SeedSet>(v["seeds"].clone()).unwrap(), edited);
}

#[tokio::test]
async fn new_session_needs_stacks() {
    let dir = tempfile::tempdir().unwrap();
    assert!(AppState::open(&dir.path().join("s"), Vec::new(), &Settings::default()).is_err());
    let missing = vec![dir.path().join("missing.tif")];
    assert!(AppState::open(&dir.path().join("s2"), missing, &Settings::default()).is_err());
}

/// Annotations, mask and peels built; returns the revision.
async fn build_all(app: &Router) -> u64 {
    let anns = cylinder_annotations(&spec(), 3);
    let (_, v) = call_json(app, Method::PUT, "/api/annotations", Some(json!({"revision": 0, "annotations": anns}))).await;
    let rev = v["revision"].as_u64().unwrap();
    let (_, v) = call_json(app, Method::POST, "/api/mask/build", Some(json!({"revision": rev}))).await;
    let rev = v["revision"].as_u64().unwrap();
    let (s, v) = call_json(app, Method::POST, "/api/peel/build", Some(json!({"revision": rev, "frame": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v["revision"].as_u64().unwrap()
}

#[tokio::test]
async fn seed_removal_drops_the_label_from_the_preview() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let rev = build_all(&app).await;
    let (_, before) = call_json(&app, Method::POST, "/api/segment/1/preview", Some(json!({"h": 20.0}))).await;
    let n_before = before["label_count"].as_u64().unwrap();
    let victim = before["seeds"]["seeds"][2]["label"].as_u64().unwrap() as u32;

    let (s, v) = call_json(&app, Method::PUT, "/api/seeds/1", Some(json!({"revision": rev, "edit": {"remove": [victim]}}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (_, after) = call_json(&app, Method::POST, "/api/segment/1/preview", Some(json!({"h": 20.0}))).await;
    let labels: Vec<u32> = serde_json::from_value(after["labels"]["data"].clone()).unwrap();
    assert!(after["label_count"].as_u64().unwrap() < n_before);
    assert!(!labels.contains(&victim));

    // replaying the same edit with the old revision changes nothing
    let (s, _) = call_json(&app, Method::PUT, "/api/seeds/1", Some(json!({"revision": rev, "edit": {"remove": [1]}}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, again) = call_json(&app, Method::GET, "/api/seeds/1", None).await;
    assert_eq!(again["seeds"], v["seeds"]);

    // removing an unknown label is a module error
    let cur = again["revision"].as_u64().unwrap();
    let (s, e) = call_json(&app, Method::PUT, "/api/seeds/1", Some(json!({"revision": cur, "edit": {"remove": [victim]}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"]["module"], "segment2d");
    // frame 0 has no peel
    let (s, _) = call_json(&app, Method::POST, "/api/segment/0/preview", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn diagonal_furrow_ends_up_centred() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let rev = build_all(&app).await;
    let session = dir.path().join("session");
    let peel = load_peel(&session.join("peel_001.tif")).unwrap();
    let h = peel.height as f64 - 1.0;
    let furrow = json!({"points": [[0.0, 5.0], [h, 5.0 + h]]});
    let (_, v) = call_json(&app, Method::PUT, "/api/furrow", Some(json!({"revision": rev, "furrow": furrow}))).await;
    let rev = v["revision"].as_u64().unwrap();
    let (s, v) = call_json(&app, Method::POST, "/api/rectify", Some(json!({"revision": rev, "frame": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let rect = load_peel(&session.join("rectified_001.tif")).unwrap();
    for r in 0..peel.height {
        let l = peel.row_len[r];
        let c = 5 + r;
        // the furrow pixel moves by round(L/2 - c), cyclically
        let shift = (l as f64 / 2.0 - c as f64).round() as i64;
        let dest = (c as i64 + shift).rem_euclid(l as i64) as usize;
        assert!((dest as f64 - l as f64 / 2.0).abs() <= 1.0);
        assert_eq!(rect.intensity.get(r, dest), peel.intensity.get(r, c));
    }
}
