//! Local HTTP service behind the annotation UI.
//!
//! Coordinates are original-image pixels, exactly as stored in the manifest.
//! Every write replaces `ground_truth.csv` by rename, under one mutex.

use std::fs;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, put};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::Value;
use spnet_core::data::{list_images, read_gray, Manifest, ManifestEntry, IMAGE_DIR, MANIFEST_NAME};
use tokio::sync::Mutex;

const BUNDLED_UI: &str = include_str!("../static/index.html");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coords {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelState {
    Unlabeled,
    Labeled,
    NoSingularPoint,
}

/// One entry of `GET /api/images`, also the body returned by a successful PUT.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub id: String,
    pub state: LabelState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Coords>,
}

struct Session {
    manifest: Manifest,
    /// Manifest text as last read or written by this session; `None` if absent.
    on_disk: Option<String>,
}

struct AppState {
    data: PathBuf,
    /// Fixed at startup.
    ids: Vec<String>,
    ui_dir: Option<PathBuf>,
    session: Mutex<Session>,
}

impl AppState {
    fn manifest_path(&self) -> PathBuf {
        self.data.join(MANIFEST_NAME)
    }

    fn image_path(&self, id: &str) -> Option<PathBuf> {
        self.ids.iter().any(|i| i == id).then(|| self.data.join(IMAGE_DIR).join(id))
    }
}

fn read_text(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

fn record(id: &str, entry: Option<ManifestEntry>) -> ImageRecord {
    let (state, coords) = match entry {
        None => (LabelState::Unlabeled, None),
        Some(ManifestEntry::NoSingularPoint) => (LabelState::NoSingularPoint, None),
        Some(ManifestEntry::Point(p)) => (LabelState::Labeled, Some(Coords { x: p.x, y: p.y })),
    };
    ImageRecord { id: id.to_owned(), state, coords }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

/// The router for the dataset in `data`; the bundled page is served unless `ui_dir` is given.
pub fn router(data: &Path, ui_dir: Option<&Path>) -> Result<Router> {
    let ids = list_images(&data.join(IMAGE_DIR)).with_context(|| format!("listing {}/{IMAGE_DIR}", data.display()))?;
    let path = data.join(MANIFEST_NAME);
    let on_disk = read_text(&path)?;
    let manifest = match &on_disk {
        Some(text) => Manifest::parse(text).with_context(|| format!("parsing {}", path.display()))?,
        None => Manifest::new(),
    };
    let state = Arc::new(AppState {
        data: data.to_path_buf(),
        ids,
        ui_dir: ui_dir.map(Path::to_path_buf),
        session: Mutex::new(Session { manifest, on_disk }),
    });
    Ok(Router::new()
        .route("/api/images", get(list))
        .route("/api/image/:id", get(image))
        .route("/api/annotation/:id", put(annotate))
        .route("/", get(index))
        .route("/*path", get(static_file))
        .with_state(state))
}

/// Serves on `127.0.0.1:port` until interrupted.
pub async fn serve(data: &Path, port: u16, ui_dir: Option<&Path>) -> Result<()> {
    let app = router(data, ui_dir)?;
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    println!("annotating {} at http://{addr}/", data.display());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn list(State(state): State<Arc<AppState>>) -> Json<Vec<ImageRecord>> {
    let session = state.session.lock().await;
    Json(state.ids.iter().map(|id| record(id, session.manifest.get(id))).collect())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("pgm") | Some("pnm") => "image/x-portable-graymap",
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") | Some("map") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = state.image_path(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown image {id}"));
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, format!("{id}: {e}")),
    }
}

/// `{x, y}` or `{none: true}`; anything else is rejected.
fn parse_body(body: &[u8]) -> Result<Option<Coords>, String> {
    let value: Value = serde_json::from_slice(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("body must be a JSON object")?;
    if obj.get("none") == Some(&Value::Bool(true)) && obj.len() == 1 {
        return Ok(None);
    }
    if obj.len() != 2 {
        return Err("expected {x, y} or {none: true}".into());
    }
    let coord = |k: &str| {
        obj.get(k)
            .and_then(Value::as_f64)
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{k} must be a finite number"))
    };
    Ok(Some(Coords { x: coord("x")?, y: coord("y")? }))
}

async fn annotate(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let Some(path) = state.image_path(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown image {id}"));
    };
    let coords = match parse_body(&body) {
        Ok(c) => c,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let entry = match coords {
        None => ManifestEntry::NoSingularPoint,
        Some(c) => {
            let image = match read_gray(&path) {
                Ok(t) => t,
                Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            };
            let (h, w) = (image.shape()[2], image.shape()[3]);
            let p = spnet_core::data::Point::new(c.x, c.y);
            if !p.inside(w, h) {
                return error(StatusCode::BAD_REQUEST, format!("({}, {}) is outside the {w}×{h} image", c.x, c.y));
            }
            ManifestEntry::Point(p)
        }
    };

    let mut session = state.session.lock().await;
    let manifest_path = state.manifest_path();
    match read_text(&manifest_path) {
        Ok(current) if current == session.on_disk => {}
        Ok(_) => return error(StatusCode::CONFLICT, "the manifest changed on disk; reload the session"),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")),
    }
    let mut next = session.manifest.clone();
    next.set(id.clone(), entry);
    if let Err(e) = next.write_atomic(&manifest_path) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    session.on_disk = Some(next.to_csv_string());
    session.manifest = next;
    Json(record(&id, Some(entry))).into_response()
}

fn html(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response()
}

async fn index(State(state): State<Arc<AppState>>) -> Response {
    match &state.ui_dir {
        None => html(BUNDLED_UI.to_owned()),
        Some(dir) => match tokio::fs::read_to_string(dir.join("index.html")).await {
            Ok(body) => html(body),
            Err(_) => error(StatusCode::NOT_FOUND, "index.html not found in the UI directory"),
        },
    }
}

/// Joins `rel` onto `root`, refusing anything that could leave it.
fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let mut out = root.to_path_buf();
    for c in Path::new(rel).components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

async fn static_file(State(state): State<Arc<AppState>>, UrlPath(rel): UrlPath<String>) -> Response {
    if rel.starts_with("api/") || rel == "api" {
        return error(StatusCode::NOT_FOUND, "no such endpoint");
    }
    let Some(path) = state.ui_dir.as_deref().and_then(|d| safe_join(d, &rel)) else {
        return error(StatusCode::NOT_FOUND, format!("{rel} not found"));
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, format!("{rel} not found")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_shapes() {
        assert_eq!(parse_body(br#"{"x": 3, "y": 4.5}"#), Ok(Some(Coords { x: 3.0, y: 4.5 })));
        assert_eq!(parse_body(br#"{"none": true}"#), Ok(None));
        for bad in [&br#"{"none": false}"#[..], br#"{"x": 1}"#, br#"{"x": "1", "y": 2}"#, b"[1,2]", b"{", br#"{"x":1,"y":2,"z":3}"#] {
            assert!(parse_body(bad).is_err(), "{}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn traversal_is_refused() {
        let root = Path::new("/srv/ui");
        assert_eq!(safe_join(root, "js/app.js"), Some(PathBuf::from("/srv/ui/js/app.js")));
        assert_eq!(safe_join(root, "../secret"), None);
        assert_eq!(safe_join(root, "/etc/passwd"), None);
    }
}
