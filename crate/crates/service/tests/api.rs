use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tower::ServiceExt;

use rexcl_core::classify::wire::{ClassifyRequest, ClassifyResponse, RowLabel};
use rexcl_core::classify::BaselineModel;
use rexcl_core::export::{self, ExportFormat};
use rexcl_core::hf::{default_allowlist, ForestModel};
use rexcl_core::model::{ClassLabel, RowKind};
use rexcl_core::pipeline::{default_baseline, default_hf_model};
use rexcl_core::store::{DocumentStore, StoredDocument};
use rexcl_service::{router, AppState, ErrorBody};

fn models() -> &'static (ForestModel, BaselineModel) {
    static MODELS: OnceLock<(ForestModel, BaselineModel)> = OnceLock::new();
    MODELS.get_or_init(|| (default_hf_model().unwrap(), default_baseline().unwrap()))
}

fn app(dir: &std::path::Path) -> (Router, AppState) {
    let (hf, baseline) = models().clone();
    let state = AppState::new(DocumentStore::open(dir).unwrap(), hf, default_allowlist(), baseline);
    (router(state.clone()), state)
}

fn fixture() -> String {
    let mut src = String::new();
    let chapters = ["one", "two", "three"];
    for (p, chapter) in chapters.iter().enumerate() {
        let p = p + 1;
        if p > 1 {
            src.push_str(&format!("<!-- page: {p} -->\n"));
        }
        src.push_str("ACME-778 Brake Controller Specification\n");
        src.push_str(&format!("# {p} Chapter {chapter}\n"));
        src.push_str(&format!("The controller shall log event {chapter} with a timestamp.\n"));
        src.push_str(&format!("Response time for {chapter} must stay below 10 ms.\n"));
        src.push_str("No Requirement\n");
        src.push_str(&format!("Page {p} of 3\n"));
    }
    src
}

fn multipart(filename: &str, contents: &str) -> Request<Body> {
    let boundary = "XBOUNDARYX";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: application/octet-stream\r\n\r\n{contents}\r\n--{boundary}--\r\n"
    );
    Request::builder()
        .method(Method::POST)
        .uri("/documents")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

fn json_request(method: Method, uri: &str, body: Value) -> Request<Body> {
    Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::builder().uri(uri).body(Body::empty()).unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>, axum::http::HeaderMap) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, body, headers)
}

async fn send_json(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let (status, body, _) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

async fn uploaded_and_extracted(app: &Router) -> String {
    let (status, body) = send_json(app, multipart("brake spec.md", &fixture())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["doc_id"].as_str().unwrap().to_string();
    let (status, body) = send_json(app, json_request(Method::POST, &format!("/documents/{id}/extract"), json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    id
}

#[tokio::test]
async fn healthz_reports_ok() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = send_json(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn unsupported_upload_is_415() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = send_json(&app, multipart("spec.pdf", "%PDF-1.4")).await;
    assert_eq!(status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    let err: ErrorBody = serde_json::from_value(body).unwrap();
    assert_eq!(err.code, "unsupported_media_type");
    assert!(err.message.contains(".md"));
}

#[tokio::test]
async fn empty_upload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = send_json(&app, multipart("empty.txt", "")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["code"], "structure_error");
}

#[tokio::test]
async fn review_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let id = uploaded_and_extracted(&app).await;

    let (status, summary) = send_json(&app, get(&format!("/documents/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["removed_count"], 6, "{summary}");
    assert_eq!(summary["row_count"], 12);

    let (status, units) = send_json(&app, get(&format!("/documents/{id}/units"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(units["units"].as_array().unwrap().len(), 18);

    let (status, body) = send_json(&app, json_request(Method::POST, &format!("/documents/{id}/classify"), json!({"binding": {"type": "builtin"}}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["total"], 12);

    let (status, page) = send_json(&app, get(&format!("/documents/{id}/rows?offset=1&limit=2"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((page["total"].as_u64(), page["offset"].as_u64()), (Some(12), Some(1)));
    let rows = page["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let target = rows[0]["object_identifier"].as_str().unwrap().to_string();
    let current: ClassLabel = serde_json::from_value(rows[0]["object_type"].clone()).unwrap();
    let new_label = if current == ClassLabel::NonFuncReq { ClassLabel::Info } else { ClassLabel::NonFuncReq };

    let (status, row) = send_json(
        &app,
        json_request(Method::PATCH, &format!("/documents/{id}/rows/{target}"), json!({"action": "correct", "label": new_label})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{row}");
    assert_eq!(row["review_state"], "CORRECTED");
    assert_eq!(row["corrected_type"], json!(new_label));

    let (status, body) = send_json(
        &app,
        json_request(Method::PATCH, &format!("/documents/{id}/rows/{target}"), json!({"action": "CORRECT", "label": new_label})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_argument");

    let (status, body) = send_json(
        &app,
        json_request(Method::PATCH, &format!("/documents/{id}/rows/{id}-R00001"), json!({"action": "edit_text", "text": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, body) = send_json(
        &app,
        json_request(Method::PATCH, &format!("/documents/{id}/rows/{id}-R99999"), json!({"action": "confirm"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");

    // Re-classifying keeps the human label.
    let (status, _) = send_json(&app, json_request(Method::POST, &format!("/documents/{id}/classify"), json!({}))).await;
    assert_eq!(status, StatusCode::OK);

    let (status, bytes, headers) = send(&app, get(&format!("/documents/{id}/export?format=csv"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_DISPOSITION], "attachment; filename=\"brake_spec.csv\"");
    let rows = export::read(&bytes, ExportFormat::Csv).unwrap();
    let corrected = rows.iter().find(|r| r.object_identifier == target).unwrap();
    assert_eq!(corrected.object_type, Some(new_label));
    let csv = String::from_utf8(bytes).unwrap();
    let line = csv.lines().find(|l| l.starts_with(&target)).unwrap();
    assert_eq!(line.split(',').nth(5), Some(new_label.as_str()));

    for format in ["json", "yaml"] {
        let (status, bytes, _) = send(&app, get(&format!("/documents/{id}/export?format={format}"))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(export::read(&bytes, format.parse().unwrap()).unwrap(), rows);
    }

    let stored = state.store().load(&id).unwrap();
    assert_eq!(stored.audit.len(), 4);
    let replayed = StoredDocument::replay(&stored, &stored.audit).unwrap();
    assert_eq!(serde_json::to_vec(&replayed).unwrap(), serde_json::to_vec(&stored).unwrap());

    let (status, audit) = send_json(&app, get(&format!("/documents/{id}/audit"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(audit["events"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn plaintext_mode_override() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (_, body) = send_json(&app, multipart("notes.md", "1 Scope\nThe system shall boot.\n")).await;
    let id = body["doc_id"].as_str().unwrap();
    let (status, summary) = send_json(&app, json_request(Method::POST, &format!("/documents/{id}/extract"), json!({"mode": "txt"}))).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    assert_eq!(summary["extracted_mode"], "PLAINTEXT");
    let (_, page) = send_json(&app, get(&format!("/documents/{id}/rows"))).await;
    assert_eq!(page["rows"][0]["object_heading"], "Scope");
}

#[tokio::test]
async fn request_errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = send_json(&app, get("/documents/DOC00042/rows")).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let (_, body) = send_json(&app, multipart("a.txt", "1 Scope\ntext\n")).await;
    let id = body["doc_id"].as_str().unwrap();
    let (status, body) = send_json(&app, json_request(Method::POST, &format!("/documents/{id}/classify"), json!({}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("conflict")));

    let (status, body) = send_json(&app, get(&format!("/documents/{id}/export?format=xlsx"))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_argument")));

    let (status, body) = send_json(&app, get(&format!("/documents/{id}/rows?limit=abc"))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (status, body) = send_json(&app, json_request(Method::POST, &format!("/documents/{id}/extract"), json!({"hf_model": {"version": 9}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let req = Request::builder()
        .method(Method::PATCH)
        .uri(format!("/documents/{id}/rows/x"))
        .body(Body::from("{not json"))
        .unwrap();
    let (status, body) = send_json(&app, req).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
}

async fn mock_classifier(fail: bool) -> String {
    let handler = move |Json(req): Json<ClassifyRequest>| async move {
        if fail {
            return Err(StatusCode::INTERNAL_SERVER_ERROR);
        }
        let labels = req
            .rows
            .iter()
            .rev()
            .map(|r| RowLabel {
                id: r.id.clone(),
                label: if r.kind == RowKind::Title { ClassLabel::Header } else { ClassLabel::FuncReq },
                confidence: 0.75,
            })
            .collect();
        Ok(Json(ClassifyResponse { labels }))
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, Router::new().route("/classify", post(handler))).await.unwrap();
    });
    format!("http://{addr}")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn external_binding_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let id = uploaded_and_extracted(&app).await;
    let endpoint = mock_classifier(false).await;
    let (status, body) = send_json(
        &app,
        json_request(Method::POST, &format!("/documents/{id}/classify"), json!({"binding": {"type": "external", "endpoint": endpoint, "timeout_ms": 5000}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let doc = state.store().load(&id).unwrap();
    assert!(doc
        .rows
        .iter()
        .all(|r| r.confidence == Some(0.75) && r.object_type == Some(if r.kind == RowKind::Title { ClassLabel::Header } else { ClassLabel::FuncReq })));

    let failing = mock_classifier(true).await;
    let (status, body) = send_json(
        &app,
        json_request(Method::POST, &format!("/documents/{id}/classify"), json!({"binding": {"type": "external", "endpoint": failing}})),
    )
    .await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_GATEWAY, Some("classification_error")));
    assert_eq!(state.store().load(&id).unwrap(), doc);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_patches_are_all_audited() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let id = uploaded_and_extracted(&app).await;
    send_json(&app, json_request(Method::POST, &format!("/documents/{id}/classify"), json!({}))).await;
    let before = state.store().load(&id).unwrap();

    let mut handles = Vec::new();
    for row in before.rows.iter().skip(1).take(8) {
        let app = app.clone();
        let uri = format!("/documents/{id}/rows/{}", row.object_identifier);
        handles.push(tokio::spawn(async move {
            send_json(&app, json_request(Method::PATCH, &uri, json!({"action": "confirm"}))).await.0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let after = state.store().load(&id).unwrap();
    assert_eq!(after.audit.len(), before.audit.len() + 8);
    assert_eq!(after.rows.iter().filter(|r| r.review_state == rexcl_core::model::ReviewState::Confirmed).count(), 8);
    assert_eq!(StoredDocument::replay(&after, &after.audit).unwrap(), after);
}
