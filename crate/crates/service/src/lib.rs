//! HTTP service around the extraction pipeline and the review workflow.
//!
//! Documents are uploaded as `.md` or `.txt`, extracted into rows,
//! classified, reviewed row by row and exported. State lives in a
//! [`DocumentStore`] directory; every mutation is audited.

mod error;

use std::collections::{BTreeMap, HashSet};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::Path as FsPath;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rexcl_core::classify::{classify_rows, BaselineModel, ClassifierBinding};
use rexcl_core::export::{self, ExportFormat};
use rexcl_core::hf::ForestModel;
use rexcl_core::ingest::read_paged;
use rexcl_core::model::{ClassLabel, RequirementRow, SourceMode};
use rexcl_core::pipeline::extract;
use rexcl_core::store::{timestamp_now, CorrectionAction, DocumentStore, StoredDocument};

pub use error::{ApiError, ApiResult, ErrorBody};

pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;
pub const DEFAULT_PAGE_LIMIT: usize = 100;
pub const MAX_PAGE_LIMIT: usize = 1000;
pub const DEFAULT_EXTERNAL_TIMEOUT_MS: u64 = 30_000;

struct Inner {
    store: DocumentStore,
    hf_model: ForestModel,
    allowlist: HashSet<String>,
    baseline: BaselineModel,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(store: DocumentStore, hf_model: ForestModel, allowlist: HashSet<String>, baseline: BaselineModel) -> Self {
        AppState(Arc::new(Inner {
            store,
            hf_model,
            allowlist,
            baseline,
        }))
    }

    pub fn store(&self) -> &DocumentStore {
        &self.0.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/documents", post(upload).get(list_documents))
        .route("/documents/{id}", get(document_summary))
        .route("/documents/{id}/extract", post(extract_document))
        .route("/documents/{id}/classify", post(classify_document))
        .route("/documents/{id}/rows", get(list_rows))
        .route("/documents/{id}/rows/{row_id}", patch(correct_row))
        .route("/documents/{id}/units", get(list_units))
        .route("/documents/{id}/audit", get(audit_log))
        .route("/documents/{id}/export", get(export_document))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Loopback address on `port`; the service has no authentication.
pub fn local_addr(port: u16) -> SocketAddr {
    SocketAddr::from((Ipv4Addr::LOCALHOST, port))
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Inner) -> ApiResult<T> + Send + 'static,
{
    let inner = state.0.clone();
    tokio::task::spawn_blocking(move || f(&inner)).await?
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

pub fn mode_for_filename(filename: &str) -> ApiResult<SourceMode> {
    let ext = FsPath::new(filename)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("md" | "markdown") => Ok(SourceMode::Markdown),
        Some("txt") => Ok(SourceMode::Plaintext),
        _ => Err(ApiError::UnsupportedMedia(format!(
            "{filename:?}: only .md and .txt uploads are accepted; convert PDF or Word files to markdown or plain text first (for example with pandoc or pdftotext)"
        ))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub doc_id: String,
    pub filename: String,
    pub mode: SourceMode,
}

async fn upload(State(state): State<AppState>, mut multipart: Multipart) -> ApiResult<(StatusCode, Json<UploadResponse>)> {
    let mut file = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::BadRequest(format!("malformed multipart body: {e}")))?
    {
        if field.name() != Some("file") {
            continue;
        }
        let filename = field
            .file_name()
            .map(str::to_string)
            .ok_or_else(|| ApiError::BadRequest("the \"file\" part has no filename".into()))?;
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::BadRequest(format!("upload interrupted: {e}")))?;
        file = Some((filename, bytes));
        break;
    }
    let (filename, bytes) = file.ok_or_else(|| ApiError::BadRequest("missing multipart part \"file\"".into()))?;
    let mode = mode_for_filename(&filename)?;

    let doc = blocking(&state, move |inner| {
        read_paged("upload", &bytes, mode)?;
        let source = String::from_utf8(bytes.to_vec()).map_err(|e| rexcl_core::Error::Decode(e.utf8_error()))?;
        Ok(inner.store.create(&filename, mode, source)?)
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(UploadResponse {
            doc_id: doc.doc_id,
            filename: doc.filename,
            mode: doc.mode,
        }),
    ))
}

async fn list_documents(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let docs = blocking(&state, |inner| Ok(inner.store.list()?)).await?;
    Ok(Json(json!({ "documents": docs })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub filename: String,
    pub mode: SourceMode,
    pub extracted_mode: Option<SourceMode>,
    pub extracted: bool,
    pub classified: bool,
    pub unit_count: usize,
    pub row_count: usize,
    pub removed_count: usize,
    pub audit_length: usize,
}

impl DocumentSummary {
    fn of(doc: &StoredDocument) -> Self {
        DocumentSummary {
            doc_id: doc.doc_id.clone(),
            filename: doc.filename.clone(),
            mode: doc.mode,
            extracted_mode: doc.extracted_mode,
            extracted: doc.extraction.is_some(),
            classified: doc.is_classified(),
            unit_count: doc.units.len(),
            row_count: doc.rows.len(),
            removed_count: doc.extraction.as_ref().map_or(0, |e| e.removed_units.len()),
            audit_length: doc.audit.len(),
        }
    }
}

async fn document_summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DocumentSummary>> {
    let doc = blocking(&state, move |inner| Ok(inner.store.load(&id)?)).await?;
    Ok(Json(DocumentSummary::of(&doc)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractBody {
    mode: Option<String>,
    hf_model: Option<Value>,
}

async fn extract_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<DocumentSummary>> {
    let body: ExtractBody = parse_body(&body)?;
    let mode = body.mode.as_deref().map(str::parse::<SourceMode>).transpose()?;
    let custom = body
        .hf_model
        .map(|v| ForestModel::from_json(&v.to_string()))
        .transpose()?;
    let doc = blocking(&state, move |inner| {
        let model = custom.as_ref().unwrap_or(&inner.hf_model);
        Ok(inner.store.update(&id, |doc| {
            let mode = mode.unwrap_or(doc.mode);
            let paged = read_paged(&doc.doc_id, doc.source.as_bytes(), mode)?;
            let output = extract(&paged, model, &inner.allowlist)?;
            doc.record_extraction(output, mode, timestamp_now())
        })?)
    })
    .await?;
    Ok(Json(DocumentSummary::of(&doc)))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum BindingRequest {
    Builtin {
        #[serde(default)]
        model: Option<BaselineModel>,
    },
    External {
        endpoint: String,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyBody {
    binding: Option<BindingRequest>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub doc_id: String,
    pub total: usize,
    pub by_label: BTreeMap<ClassLabel, usize>,
}

async fn classify_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ClassifySummary>> {
    let body: ClassifyBody = parse_body(&body)?;
    let doc = blocking(&state, move |inner| {
        let binding = match body.binding {
            None | Some(BindingRequest::Builtin { model: None }) => ClassifierBinding::Builtin {
                model: inner.baseline.clone(),
            },
            Some(BindingRequest::Builtin { model: Some(model) }) => ClassifierBinding::Builtin { model },
            Some(BindingRequest::External { endpoint, timeout_ms }) => ClassifierBinding::External {
                endpoint,
                timeout_ms: timeout_ms.unwrap_or(DEFAULT_EXTERNAL_TIMEOUT_MS),
            },
        };
        Ok(inner.store.update(&id, |doc| {
            if doc.extraction.is_none() {
                return Err(rexcl_core::Error::State(format!("document {} is not extracted", doc.doc_id)));
            }
            let output = classify_rows(&binding, &doc.doc_id, &doc.rows)?;
            doc.record_classification(&output, timestamp_now())
        })?)
    })
    .await?;
    let mut by_label = BTreeMap::new();
    for label in doc.rows.iter().filter_map(|r| r.object_type) {
        *by_label.entry(label).or_insert(0) += 1;
    }
    Ok(Json(ClassifySummary {
        doc_id: doc.doc_id,
        total: doc.rows.len(),
        by_label,
    }))
}

#[derive(Debug, Deserialize)]
struct RowsQuery {
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RowsPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub rows: Vec<RequirementRow>,
}

async fn list_rows(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<RowsQuery>, QueryRejection>,
) -> ApiResult<Json<RowsPage>> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_LIMIT);
    if limit == 0 || limit > MAX_PAGE_LIMIT {
        return Err(ApiError::BadRequest(format!("limit must be between 1 and {MAX_PAGE_LIMIT}")));
    }
    let doc = blocking(&state, move |inner| Ok(inner.store.load(&id)?)).await?;
    let rows = doc.rows.iter().skip(offset).take(limit).cloned().collect();
    Ok(Json(RowsPage {
        total: doc.rows.len(),
        offset,
        limit,
        rows,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchBody {
    action: Option<String>,
    label: Option<String>,
    text: Option<String>,
}

fn correction_action(body: PatchBody) -> ApiResult<CorrectionAction> {
    let action = body
        .action
        .ok_or_else(|| ApiError::BadRequest("missing \"action\"".into()))?
        .to_ascii_lowercase()
        .replace('-', "_");
    match action.as_str() {
        "confirm" => Ok(CorrectionAction::Confirm),
        "correct" => {
            let label = body
                .label
                .ok_or_else(|| ApiError::BadRequest("action \"correct\" needs a \"label\"".into()))?;
            Ok(CorrectionAction::Correct { label: label.parse()? })
        }
        "edit_text" => {
            let text = body
                .text
                .ok_or_else(|| ApiError::BadRequest("action \"edit_text\" needs a \"text\"".into()))?;
            Ok(CorrectionAction::EditText { text })
        }
        other => Err(ApiError::BadRequest(format!(
            "unknown action {other:?}; expected confirm, correct or edit_text"
        ))),
    }
}

async fn correct_row(
    State(state): State<AppState>,
    Path((id, row_id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<RequirementRow>> {
    let action = correction_action(parse_body(&body)?)?;
    let row = blocking(&state, move |inner| {
        let doc = inner
            .store
            .update(&id, |doc| doc.apply_correction(&row_id, action))?;
        Ok(doc
            .rows
            .into_iter()
            .find(|r| r.object_identifier == row_id)
            .expect("corrected row exists"))
    })
    .await?;
    Ok(Json(row))
}

async fn list_units(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let doc = blocking(&state, move |inner| Ok(inner.store.load(&id)?)).await?;
    let removed = doc.extraction.map(|e| e.removed_units).unwrap_or_default();
    Ok(Json(json!({
        "doc_id": doc.doc_id,
        "units": doc.units,
        "removed_units": removed,
    })))
}

async fn audit_log(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let doc = blocking(&state, move |inner| Ok(inner.store.load(&id)?)).await?;
    Ok(Json(json!({ "doc_id": doc.doc_id, "events": doc.audit })))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

/// Download name: the upload's stem with unsafe characters replaced.
pub fn export_filename(original: &str, format: ExportFormat) -> String {
    let stem = FsPath::new(original)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("export");
    let clean: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    let clean = if clean.trim_matches('.').is_empty() { "export".to_string() } else { clean };
    format!("{clean}.{}", format.extension())
}

async fn export_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let format: ExportFormat = q.format.as_deref().unwrap_or("csv").parse()?;
    let doc = blocking(&state, move |inner| Ok(inner.store.load(&id)?)).await?;
    if doc.extraction.is_none() {
        return Err(rexcl_core::Error::State(format!("document {} is not extracted", doc.doc_id)).into());
    }
    let body = export::write(&doc.rows, format);
    let disposition = format!("attachment; filename=\"{}\"", export_filename(&doc.filename, format));
    Ok((
        [
            (header::CONTENT_TYPE, format.content_type().to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        body,
    )
        .into_response())
}
