//! JSON wire protocol for an external classifier.
//!
//! ```text
//! POST /classify
//! {"rows":[{"id":"D-R00001","text":"...","kind":"TITLE"}]}
//! -> {"labels":[{"id":"D-R00001","label":"HEADER","confidence":0.97}]}
//! ```
//!
//! Every request id must come back exactly once. Responses are matched by
//! id, so a server may answer in any order.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, RequirementRow, RowKind};

/// Rows per request.
pub const BATCH_SIZE: usize = 256;
/// Requests in flight at once.
pub const MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRow {
    pub id: String,
    pub text: String,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub rows: Vec<WireRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLabel {
    pub id: String,
    pub label: ClassLabel,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub labels: Vec<RowLabel>,
}

impl ClassifyRequest {
    pub fn from_rows(rows: &[RequirementRow]) -> Self {
        ClassifyRequest {
            rows: rows
                .iter()
                .map(|r| WireRow {
                    id: r.object_identifier.clone(),
                    text: r.content().to_string(),
                    kind: r.kind,
                })
                .collect(),
        }
    }
}

/// Checks that the response answers each request id exactly once with a
/// confidence in [0, 1], and returns the labels in request order.
pub fn check_response(request: &ClassifyRequest, response: ClassifyResponse) -> Result<Vec<RowLabel>, String> {
    let mut by_id: HashMap<String, RowLabel> = HashMap::with_capacity(response.labels.len());
    for label in response.labels {
        if !(0.0..=1.0).contains(&label.confidence) {
            return Err(format!("confidence {} for {} outside [0, 1]", label.confidence, label.id));
        }
        let id = label.id.clone();
        if by_id.insert(id.clone(), label).is_some() {
            return Err(format!("row {id} answered twice"));
        }
    }
    let mut out = Vec::with_capacity(request.rows.len());
    for row in &request.rows {
        match by_id.remove(&row.id) {
            Some(label) => out.push(label),
            None => return Err(format!("row {} missing from response", row.id)),
        }
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(format!("response names unknown row {extra}"));
    }
    Ok(out)
}

pub(crate) struct RemoteError {
    pub message: String,
    /// Labels from the batches that did succeed.
    pub answered: Vec<RowLabel>,
}

fn classify_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/classify") {
        base.to_string()
    } else {
        format!("{base}/classify")
    }
}

fn send_batch(
    client: &reqwest::blocking::Client,
    url: &str,
    request: &ClassifyRequest,
) -> Result<Vec<RowLabel>, String> {
    let response = client
        .post(url)
        .json(request)
        .send()
        .map_err(|e| format!("request to {url} failed: {e}"))?;
    let status = response.status();
    if status != reqwest::StatusCode::OK {
        return Err(format!("classifier answered HTTP {status}"));
    }
    let body: ClassifyResponse = response
        .json()
        .map_err(|e| format!("malformed classifier response: {e}"))?;
    check_response(request, body)
}

pub(crate) fn classify_remote(
    endpoint: &str,
    timeout_ms: u64,
    rows: &[RequirementRow],
) -> Result<Vec<RowLabel>, RemoteError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_millis(timeout_ms.max(1)))
        .build()
        .map_err(|e| RemoteError {
            message: format!("cannot build HTTP client: {e}"),
            answered: Vec::new(),
        })?;
    let url = classify_url(endpoint);
    let requests: Vec<ClassifyRequest> = rows.chunks(BATCH_SIZE).map(ClassifyRequest::from_rows).collect();

    let mut results: Vec<Result<Vec<RowLabel>, String>> = Vec::with_capacity(requests.len());
    for wave in requests.chunks(MAX_IN_FLIGHT) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|req| scope.spawn(|| send_batch(&client, &url, req)))
                .collect();
            for h in handles {
                results.push(h.join().unwrap_or_else(|_| Err("classifier worker panicked".into())));
            }
        });
    }

    let mut answered = Vec::with_capacity(rows.len());
    let mut first_error = None;
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(labels) => answered.extend(labels),
            Err(e) if first_error.is_none() => first_error = Some(format!("batch {i}: {e}")),
            Err(_) => {}
        }
    }
    match first_error {
        None => Ok(answered),
        Some(message) => Err(RemoteError { message, answered }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(ids: &[&str]) -> ClassifyRequest {
        ClassifyRequest {
            rows: ids
                .iter()
                .map(|id| WireRow {
                    id: id.to_string(),
                    text: "t".into(),
                    kind: RowKind::Text,
                })
                .collect(),
        }
    }

    fn label(id: &str, confidence: f64) -> RowLabel {
        RowLabel {
            id: id.into(),
            label: ClassLabel::Info,
            confidence,
        }
    }

    #[test]
    fn wire_format() {
        let json = serde_json::to_string(&request(&["a"])).unwrap();
        assert_eq!(json, r#"{"rows":[{"id":"a","text":"t","kind":"TEXT"}]}"#);
        let resp: ClassifyResponse =
            serde_json::from_str(r#"{"labels":[{"id":"a","label":"NON_FUNC_REQ","confidence":0.5}]}"#).unwrap();
        assert_eq!(resp.labels[0].label, ClassLabel::NonFuncReq);
        assert!(serde_json::from_str::<ClassifyResponse>(r#"{"labels":[{"id":"a","label":"OTHER","confidence":0.5}]}"#).is_err());
    }

    #[test]
    fn response_reordered_by_id() {
        let req = request(&["a", "b", "c"]);
        let resp = ClassifyResponse {
            labels: vec![label("c", 0.1), label("a", 0.2), label("b", 0.3)],
        };
        let ids: Vec<_> = check_response(&req, resp).unwrap().into_iter().map(|l| l.id).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn response_violations() {
        let req = request(&["a", "b"]);
        let missing = ClassifyResponse { labels: vec![label("a", 0.2)] };
        assert!(check_response(&req, missing).unwrap_err().contains("missing"));
        let dup = ClassifyResponse {
            labels: vec![label("a", 0.2), label("a", 0.2), label("b", 0.1)],
        };
        assert!(check_response(&req, dup).unwrap_err().contains("twice"));
        let extra = ClassifyResponse {
            labels: vec![label("a", 0.2), label("b", 0.2), label("z", 0.1)],
        };
        assert!(check_response(&req, extra).unwrap_err().contains("unknown"));
        let bad = ClassifyResponse {
            labels: vec![label("a", 1.5), label("b", 0.2)],
        };
        assert!(check_response(&req, bad).is_err());
    }

    #[test]
    fn url_building() {
        assert_eq!(classify_url("http://h:1"), "http://h:1/classify");
        assert_eq!(classify_url("http://h:1/"), "http://h:1/classify");
        assert_eq!(classify_url("http://h:1/classify"), "http://h:1/classify");
    }
}
