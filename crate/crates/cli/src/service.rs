//! HTTP service behind the triage UI.
//!
//! ```text
//! GET  /api/warnings                 ranked list with band and judgment state
//! GET  /api/warnings/{id}            detail with a ±10-line source excerpt
//! POST /api/warnings/{id}/judgment   {"verdict": "confirmed"|"dismissed", "note": "..."}
//! GET  /api/export                   judgments as labeled JSONL
//! GET  /api/meta                     digests and counts
//! GET  /                             static UI assets (--assets) or a placeholder page
//! ```

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use acw_core::digest::sha256_hex;
use acw_core::encoder::code_channel;
use acw_core::ingest::{parse_report, SourceSnapshot};
use acw_core::miner::{write_jsonl, WarningStatus};
use acw_core::nn::Band;
use acw_core::{AcwConfig, LabeledRecord, ModelDoc, Warning, WeakLabelClass};

use crate::commands::rank_report;
use crate::output::RankedEntry;
use crate::session::{Judgment, Session, Verdict};

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub sources: Option<PathBuf>,
    /// 0 picks a free port; the bound address is printed on startup.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session file holding the judgments; created on first write.
    #[arg(long)]
    pub state: PathBuf,
    /// Directory of built UI assets served at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

pub struct AppState {
    entries: Vec<RankedEntry>,
    warnings: Vec<Warning>,
    index: HashMap<String, usize>,
    snapshot: Option<SourceSnapshot>,
    model_digest: String,
    report_digest: String,
    state_path: PathBuf,
    assets: Option<PathBuf>,
    session: RwLock<Arc<Session>>,
    /// Serializes judgment writes.
    writer: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(
        model_bytes: &[u8],
        report_bytes: &[u8],
        snapshot: Option<SourceSnapshot>,
        state_path: PathBuf,
        assets: Option<PathBuf>,
        cfg: &AcwConfig,
    ) -> Result<Self> {
        let model = ModelDoc::from_json(std::str::from_utf8(model_bytes).context("model file is not UTF-8")?)?;
        let entries = rank_report(&model, report_bytes, snapshot.as_ref(), cfg)?;
        let parsed = parse_report(report_bytes, &cfg.bug_types, 0)?;
        let by_id: HashMap<&str, &Warning> = parsed.warnings.iter().map(|w| (w.id.as_str(), w)).collect();
        let warnings: Vec<Warning> = entries.iter().map(|e| by_id[e.id.as_str()].clone()).collect();
        let index: HashMap<String, usize> = entries.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        let model_digest = sha256_hex(model_bytes);
        let report_digest = sha256_hex(report_bytes);
        let session_id = sha256_hex(format!("{model_digest}:{report_digest}").as_bytes())[..12].to_string();
        let session = Session::open(&state_path, &session_id, &report_digest, |id| index.contains_key(id))?;
        Ok(AppState {
            entries,
            warnings,
            index,
            snapshot,
            model_digest,
            report_digest,
            state_path,
            assets,
            session: RwLock::new(Arc::new(session)),
            writer: tokio::sync::Mutex::new(()),
        })
    }

    fn current(&self) -> Arc<Session> {
        self.session.read().expect("session lock poisoned").clone()
    }

    fn view(&self, i: usize, session: &Session) -> WarningView {
        let entry = self.entries[i].clone();
        let judgment = session.judgments.get(&entry.id).cloned();
        WarningView { entry, judgment }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarningView {
    #[serde(flatten)]
    pub entry: RankedEntry,
    pub judgment: Option<Judgment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Excerpt {
    pub start_line: u32,
    pub highlight_line: u32,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarningDetail {
    #[serde(flatten)]
    pub view: WarningView,
    /// Absent when the source file is not available.
    pub excerpt: Option<Excerpt>,
}

pub const EXCERPT_RADIUS: u32 = 10;

pub fn excerpt(source: &str, line: u32) -> Option<Excerpt> {
    let lines: Vec<&str> = source.lines().collect();
    let n = lines.len() as u32;
    if line == 0 || line > n {
        return None;
    }
    let start = line.saturating_sub(EXCERPT_RADIUS).max(1);
    let end = (line + EXCERPT_RADIUS).min(n);
    Some(Excerpt {
        start_line: start,
        highlight_line: line,
        lines: lines[(start - 1) as usize..end as usize].iter().map(|s| s.to_string()).collect(),
    })
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn list(State(st): State<Arc<AppState>>) -> Json<Vec<WarningView>> {
    let session = st.current();
    Json((0..st.entries.len()).map(|i| st.view(i, &session)).collect())
}

async fn detail(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(&i) = st.index.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no warning {id}"));
    };
    let w = &st.warnings[i];
    let excerpt = st
        .snapshot
        .as_ref()
        .and_then(|s| s.get(&w.file))
        .and_then(|src| excerpt(src, w.line));
    Json(WarningDetail {
        view: st.view(i, &st.current()),
        excerpt,
    })
    .into_response()
}

#[derive(Deserialize)]
struct JudgmentBody {
    verdict: serde_json::Value,
    #[serde(default)]
    note: Option<String>,
}

async fn judge(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let Some(&i) = st.index.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no warning {id}"));
    };
    let body: JudgmentBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid judgment body: {e}")),
    };
    let Some(verdict) = body.verdict.as_str().and_then(Verdict::parse) else {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("verdict must be \"confirmed\" or \"dismissed\", got {}", body.verdict),
        );
    };
    let judgment = Judgment {
        verdict,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0),
        note: body.note.unwrap_or_default(),
    };

    let _guard = st.writer.lock().await;
    let mut next = (*st.current()).clone();
    next.apply(&id, judgment);
    if let Err(e) = next.save(&st.state_path) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"));
    }
    let next = Arc::new(next);
    *st.session.write().expect("session lock poisoned") = next.clone();
    Json(st.view(i, &next)).into_response()
}

/// Confirmed warnings become VTB (actionable), dismissed ones FalseWarning.
pub fn export_records(st: &AppState, session: &Session) -> Vec<LabeledRecord> {
    st.warnings
        .iter()
        .filter_map(|w| {
            let j = session.judgments.get(&w.id)?;
            let (status, aggregated) = match j.verdict {
                Verdict::Confirmed => (WarningStatus::Actionable, WeakLabelClass::Vtb),
                Verdict::Dismissed => (WarningStatus::FalseAlarm, WeakLabelClass::FalseWarning),
            };
            Some(LabeledRecord {
                warning: w.clone(),
                status,
                cm: None,
                cc: None,
                aggregated,
                project: "triage".into(),
                code_tokens: st.snapshot.as_ref().map(|s| code_channel(w, s)).unwrap_or_default(),
            })
        })
        .collect()
}

async fn export(State(st): State<Arc<AppState>>) -> Response {
    let records = export_records(&st, &st.current());
    let mut body = Vec::new();
    if let Err(e) = write_jsonl(&mut body, &records) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    (
        [
            (header::CONTENT_TYPE, "application/x-ndjson"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"labels.jsonl\""),
        ],
        body,
    )
        .into_response()
}

async fn meta(State(st): State<Arc<AppState>>) -> Response {
    let session = st.current();
    let judged = |v| session.judgments.values().filter(|j| j.verdict == v).count();
    let band = |b| st.entries.iter().filter(|e| e.band == b).count();
    Json(json!({
        "session_id": session.session_id,
        "model_digest": st.model_digest,
        "report_digest": st.report_digest,
        "class_order": ["FalseWarning", "UTB", "LTB", "VTB"],
        "counts": {
            "warnings": st.entries.len(),
            "red": band(Band::Red),
            "orange": band(Band::Orange),
            "judged": session.judgments.len(),
            "confirmed": judged(Verdict::Confirmed),
            "dismissed": judged(Verdict::Dismissed),
        },
    }))
    .into_response()
}

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>acw triage</title></head>
<body>
<h1>acw triage service</h1>
<p>No UI assets were mounted (start with <code>--assets DIR</code>). The API is available:</p>
<ul>
<li><a href=\"/api/warnings\">/api/warnings</a></li>
<li><a href=\"/api/meta\">/api/meta</a></li>
<li><a href=\"/api/export\">/api/export</a></li>
</ul>
</body></html>
";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn asset(st: &AppState, rel: &str) -> Response {
    let Some(root) = &st.assets else {
        return if rel.is_empty() {
            Html(PLACEHOLDER).into_response()
        } else {
            error(StatusCode::NOT_FOUND, "no assets mounted")
        };
    };
    let rel = Path::new(if rel.is_empty() { "index.html" } else { rel });
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "not found"),
    }
}

async fn index(State(st): State<Arc<AppState>>) -> Response {
    asset(&st, "").await
}

async fn static_file(State(st): State<Arc<AppState>>, UrlPath(rel): UrlPath<String>) -> Response {
    asset(&st, &rel).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/warnings", get(list))
        .route("/api/warnings/{id}", get(detail))
        .route("/api/warnings/{id}/judgment", post(judge))
        .route("/api/export", get(export))
        .route("/api/meta", get(meta))
        .route("/", get(index))
        .route("/{*path}", get(static_file))
        .with_state(state)
}

pub fn serve(args: &ServeArgs, cfg: &AcwConfig) -> Result<()> {
    let model = std::fs::read(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let report = std::fs::read(&args.report).with_context(|| format!("reading {}", args.report.display()))?;
    let snapshot = args.sources.as_deref().map(SourceSnapshot::from_dir).transpose()?;
    let state = Arc::new(AppState::new(
        &model,
        &report,
        snapshot,
        args.state.clone(),
        args.assets.clone(),
        cfg,
    )?);

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let addr: SocketAddr = format!("{}:{}", args.host, args.port)
            .parse()
            .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
