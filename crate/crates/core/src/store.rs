//! Stored documents, the review state machine and file-backed persistence.
//!
//! Every change to a [`StoredDocument`] goes through an [`AuditEvent`], and
//! the audit log is append-only: replaying it over the freshly uploaded
//! document rebuilds the current state exactly.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::{apply_labels, RowLabel};
use crate::error::{Error, Result};
use crate::model::{
    ClassLabel, ExtractionResult, FinalOutput, RequirementRow, ReviewState, RowKind, SourceMode, TextUnit,
};
use crate::pipeline::ExtractionOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CorrectionAction {
    Confirm,
    Correct { label: ClassLabel },
    EditText { text: String },
}

/// The mutable review fields of a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReview {
    pub object_text: String,
    pub object_type: Option<ClassLabel>,
    pub confidence: Option<f64>,
    pub review_state: ReviewState,
    pub corrected_type: Option<ClassLabel>,
}

impl RowReview {
    fn of(row: &RequirementRow) -> Self {
        RowReview {
            object_text: row.object_text.clone(),
            object_type: row.object_type,
            confidence: row.confidence,
            review_state: row.review_state,
            corrected_type: row.corrected_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Extracted {
        timestamp: String,
        mode: SourceMode,
        units: Vec<TextUnit>,
        extraction: ExtractionResult,
        rows: Vec<RequirementRow>,
    },
    Classified {
        timestamp: String,
        labels: Vec<RowLabel>,
    },
    Corrected {
        timestamp: String,
        row_id: String,
        action: CorrectionAction,
        old: RowReview,
        new: RowReview,
    },
}

impl AuditEvent {
    pub fn timestamp(&self) -> &str {
        match self {
            AuditEvent::Extracted { timestamp, .. }
            | AuditEvent::Classified { timestamp, .. }
            | AuditEvent::Corrected { timestamp, .. } => timestamp,
        }
    }
}

pub fn timestamp_now() -> String {
    format_timestamp(Utc::now())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDocument {
    pub doc_id: String,
    pub filename: String,
    /// Mode inferred at upload.
    pub mode: SourceMode,
    /// Mode of the last extraction, which may override the upload mode.
    pub extracted_mode: Option<SourceMode>,
    /// Uploaded text, verbatim.
    pub source: String,
    pub units: Vec<TextUnit>,
    pub extraction: Option<ExtractionResult>,
    pub rows: Vec<RequirementRow>,
    pub audit: Vec<AuditEvent>,
}

impl StoredDocument {
    pub fn new(doc_id: &str, filename: &str, mode: SourceMode, source: String) -> Self {
        StoredDocument {
            doc_id: doc_id.to_string(),
            filename: filename.to_string(),
            mode,
            extracted_mode: None,
            source,
            units: Vec::new(),
            extraction: None,
            rows: Vec::new(),
            audit: Vec::new(),
        }
    }

    /// The document as uploaded, before any event.
    pub fn initial(&self) -> Self {
        StoredDocument::new(&self.doc_id, &self.filename, self.mode, self.source.clone())
    }

    pub fn is_classified(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.object_type.is_some())
    }

    /// Rows with labels; fails if any row is still unlabelled.
    pub fn final_output(&self) -> Result<FinalOutput> {
        if !self.is_classified() {
            return Err(Error::State(format!("document {} is not classified", self.doc_id)));
        }
        Ok(FinalOutput {
            doc_id: self.doc_id.clone(),
            rows: self.rows.clone(),
        })
    }

    pub fn record_extraction(&self, output: ExtractionOutput, mode: SourceMode, timestamp: String) -> Result<Self> {
        self.apply_event(AuditEvent::Extracted {
            timestamp,
            mode,
            units: output.units,
            extraction: output.extraction,
            rows: output.rows,
        })
    }

    pub fn record_classification(&self, output: &FinalOutput, timestamp: String) -> Result<Self> {
        let labels = output
            .rows
            .iter()
            .map(|r| {
                Ok(RowLabel {
                    id: r.object_identifier.clone(),
                    label: r
                        .object_type
                        .ok_or_else(|| Error::invalid(format!("row {} has no label", r.object_identifier)))?,
                    confidence: r.confidence.unwrap_or(0.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.apply_event(AuditEvent::Classified { timestamp, labels })
    }

    pub fn apply_correction(&self, row_id: &str, action: CorrectionAction) -> Result<Self> {
        self.apply_correction_at(row_id, action, timestamp_now())
    }

    pub fn apply_correction_at(&self, row_id: &str, action: CorrectionAction, timestamp: String) -> Result<Self> {
        let row = self
            .rows
            .iter()
            .find(|r| r.object_identifier == row_id)
            .ok_or_else(|| Error::NotFound(format!("row {row_id} in document {}", self.doc_id)))?;
        let old = RowReview::of(row);
        let mut probe = row.clone();
        transition(&mut probe, &action)?;
        self.apply_event(AuditEvent::Corrected {
            timestamp,
            row_id: row_id.to_string(),
            action,
            old,
            new: RowReview::of(&probe),
        })
    }

    /// Applies one event and appends it to the audit log.
    pub fn apply_event(&self, event: AuditEvent) -> Result<Self> {
        let mut next = self.clone();
        match &event {
            AuditEvent::Extracted {
                mode,
                units,
                extraction,
                rows,
                ..
            } => {
                next.extracted_mode = Some(*mode);
                next.units = units.clone();
                next.extraction = Some(extraction.clone());
                next.rows = rows.clone();
            }
            AuditEvent::Classified { labels, .. } => {
                if next.rows.is_empty() {
                    return Err(Error::State(format!("document {} has no rows to classify", self.doc_id)));
                }
                apply_labels(&mut next.rows, labels)?;
            }
            AuditEvent::Corrected {
                row_id,
                action,
                old,
                new,
                ..
            } => {
                let idx = next
                    .rows
                    .iter()
                    .position(|r| &r.object_identifier == row_id)
                    .ok_or_else(|| Error::NotFound(format!("row {row_id} in document {}", self.doc_id)))?;
                if &RowReview::of(&next.rows[idx]) != old {
                    return Err(Error::State(format!("audit event for {row_id} does not match the row state")));
                }
                transition(&mut next.rows[idx], action)?;
                if &RowReview::of(&next.rows[idx]) != new {
                    return Err(Error::State(format!("audit event for {row_id} does not replay")));
                }
                if let CorrectionAction::EditText { text } = action {
                    next.sync_extraction_text(idx, text)?;
                }
            }
        }
        next.audit.push(event);
        Ok(next)
    }

    /// Rebuilds a document by replaying `events` over `initial`.
    pub fn replay(initial: &StoredDocument, events: &[AuditEvent]) -> Result<Self> {
        let mut doc = initial.initial();
        for event in events {
            doc = doc.apply_event(event.clone())?;
        }
        Ok(doc)
    }

    /// Mirrors a row text edit into the extraction tuples.
    fn sync_extraction_text(&mut self, row_idx: usize, text: &str) -> Result<()> {
        let extraction = self
            .extraction
            .as_mut()
            .ok_or_else(|| Error::State("rows without extraction".into()))?;
        let mut ordinal = 0;
        for tuple in &mut extraction.tuples {
            ordinal += 1;
            for slot in &mut tuple.texts {
                if ordinal == row_idx {
                    *slot = text.to_string();
                    return Ok(());
                }
                ordinal += 1;
            }
        }
        Err(Error::State(format!("row {row_idx} has no extraction text")))
    }
}

fn transition(row: &mut RequirementRow, action: &CorrectionAction) -> Result<()> {
    match action {
        CorrectionAction::Confirm => {
            row.review_state = ReviewState::Confirmed;
            row.corrected_type = None;
        }
        CorrectionAction::Correct { label } => {
            if row.effective_type() == Some(*label) {
                return Err(Error::invalid(format!(
                    "row {} is already {label}; use confirm",
                    row.object_identifier
                )));
            }
            row.review_state = ReviewState::Corrected;
            row.corrected_type = Some(*label);
            row.object_type = Some(*label);
            row.confidence = Some(1.0);
        }
        CorrectionAction::EditText { text } => {
            if row.kind == RowKind::Title {
                return Err(Error::invalid(format!(
                    "row {} is a TITLE row; only TEXT rows can be edited",
                    row.object_identifier
                )));
            }
            if text.trim().is_empty() {
                return Err(Error::invalid("replacement text is empty"));
            }
            row.object_text = text.clone();
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub doc_id: String,
    pub filename: String,
    pub mode: SourceMode,
    pub created_at: String,
}

/// One JSON file per document plus `index.json`, under a data directory.
///
/// Writes go to a temporary file that is fsynced and renamed into place, so
/// readers never see a partially written document. Updates to one document
/// are serialized by a per-document lock.
pub struct DocumentStore {
    dir: PathBuf,
    index_lock: Mutex<()>,
    doc_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

const INDEX_FILE: &str = "index.json";

fn valid_doc_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        // Directory fsync is not supported everywhere; the rename already happened.
        if let Ok(d) = File::open(parent) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

impl DocumentStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let index = dir.join(INDEX_FILE);
        if !index.exists() {
            write_atomic(&index, b"[]\n")?;
        }
        Ok(DocumentStore {
            dir,
            index_lock: Mutex::new(()),
            doc_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn doc_path(&self, doc_id: &str) -> Result<PathBuf> {
        if !valid_doc_id(doc_id) {
            return Err(Error::NotFound(format!("document {doc_id}")));
        }
        Ok(self.dir.join(format!("{doc_id}.json")))
    }

    fn lock_for(&self, doc_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.doc_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(doc_id.to_string()).or_default().clone()
    }

    fn read_index(&self) -> Result<Vec<IndexEntry>> {
        let bytes = fs::read(self.dir.join(INDEX_FILE))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::parse(INDEX_FILE, e.to_string()))
    }

    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.read_index()
    }

    pub fn create(&self, filename: &str, mode: SourceMode, source: String) -> Result<StoredDocument> {
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut index = self.read_index()?;
        let doc_id = format!("DOC{:05}", index.len() + 1);
        let doc = StoredDocument::new(&doc_id, filename, mode, source);
        self.persist(&doc)?;
        index.push(IndexEntry {
            doc_id,
            filename: filename.to_string(),
            mode,
            created_at: timestamp_now(),
        });
        let mut bytes = serde_json::to_vec_pretty(&index).expect("index serializes");
        bytes.push(b'\n');
        write_atomic(&self.dir.join(INDEX_FILE), &bytes)?;
        Ok(doc)
    }

    pub fn load(&self, doc_id: &str) -> Result<StoredDocument> {
        let path = self.doc_path(doc_id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("document {doc_id}")));
            }
            Err(e) => return Err(e.into()),
        };
        serde_json::from_slice(&bytes).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    fn persist(&self, doc: &StoredDocument) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(doc).expect("document serializes");
        bytes.push(b'\n');
        write_atomic(&self.doc_path(&doc.doc_id)?, &bytes)
    }

    /// Loads, transforms and persists one document under its write lock.
    pub fn update<F>(&self, doc_id: &str, f: F) -> Result<StoredDocument>
    where
        F: FnOnce(&StoredDocument) -> Result<StoredDocument>,
    {
        let lock = self.lock_for(doc_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.load(doc_id)?;
        let next = f(&current)?;
        self.persist(&next)?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SectionTitle, SectionTuple};

    fn ts(n: u32) -> String {
        format!("2026-01-01T00:00:{n:02}.000000Z")
    }

    fn extracted_doc() -> StoredDocument {
        let extraction = ExtractionResult {
            doc_id: "DOC00001".into(),
            tuples: vec![SectionTuple {
                title: SectionTitle {
                    raw_label: "1".into(),
                    canonical_path: vec![1],
                    heading: "Scope".into(),
                    synthesized: false,
                },
                texts: vec!["The unit shall brake.".into(), "Latency within 5 ms.".into()],
            }],
            removed_units: vec![],
        };
        let rows = crate::section::to_rows(&extraction).unwrap();
        let doc = StoredDocument::new("DOC00001", "spec.md", SourceMode::Markdown, "# 1 Scope\n".into());
        let doc = doc
            .record_extraction(
                ExtractionOutput {
                    units: vec![],
                    extraction,
                    rows,
                },
                SourceMode::Markdown,
                ts(1),
            )
            .unwrap();
        let mut output = FinalOutput {
            doc_id: doc.doc_id.clone(),
            rows: doc.rows.clone(),
        };
        for (row, label) in output.rows.iter_mut().zip([ClassLabel::Header, ClassLabel::FuncReq, ClassLabel::FuncReq]) {
            row.object_type = Some(label);
            row.confidence = Some(0.9);
        }
        doc.record_classification(&output, ts(2)).unwrap()
    }

    #[test]
    fn correct_sets_corrected_state() {
        let doc = extracted_doc();
        let before = doc.audit.len();
        let next = doc
            .apply_correction_at("DOC00001-R00003", CorrectionAction::Correct { label: ClassLabel::NonFuncReq }, ts(3))
            .unwrap();
        let row = &next.rows[2];
        assert_eq!(row.review_state, ReviewState::Corrected);
        assert_eq!(row.corrected_type, Some(ClassLabel::NonFuncReq));
        assert_eq!(row.object_type, Some(ClassLabel::NonFuncReq));
        assert_eq!(next.audit.len(), before + 1);
        assert_eq!(next.rows[..2], doc.rows[..2]);
        row.validate().unwrap();
    }

    #[test]
    fn confirm_unreviewed_row() {
        let doc = extracted_doc();
        let next = doc.apply_correction_at("DOC00001-R00001", CorrectionAction::Confirm, ts(3)).unwrap();
        assert_eq!(next.rows[0].review_state, ReviewState::Confirmed);
        assert_eq!(next.audit.len(), doc.audit.len() + 1);
    }

    #[test]
    fn correction_errors_leave_document_unchanged() {
        let doc = extracted_doc();
        let unknown = doc.apply_correction_at("nope", CorrectionAction::Correct { label: ClassLabel::Info }, ts(3));
        assert!(matches!(unknown, Err(Error::NotFound(_))));

        let same = doc.apply_correction_at("DOC00001-R00002", CorrectionAction::Correct { label: ClassLabel::FuncReq }, ts(3));
        assert!(matches!(same, Err(Error::InvalidArgument(_))));

        let title_edit = doc.apply_correction_at("DOC00001-R00001", CorrectionAction::EditText { text: "x".into() }, ts(3));
        assert!(matches!(title_edit, Err(Error::InvalidArgument(_))));
        assert_eq!(doc, extracted_doc());
    }

    #[test]
    fn edit_text_updates_rows_and_extraction() {
        let doc = extracted_doc();
        let next = doc
            .apply_correction_at("DOC00001-R00003", CorrectionAction::EditText { text: "Latency within 2 ms.".into() }, ts(3))
            .unwrap();
        assert_eq!(next.rows[2].object_text, "Latency within 2 ms.");
        assert_eq!(next.extraction.as_ref().unwrap().tuples[0].texts[1], "Latency within 2 ms.");
        let regenerated = crate::section::to_rows(next.extraction.as_ref().unwrap()).unwrap();
        for (a, b) in regenerated.iter().zip(&next.rows) {
            assert_eq!((&a.object_number, &a.object_text), (&b.object_number, &b.object_text));
        }
    }

    #[test]
    fn replay_reproduces_state() {
        let doc = extracted_doc()
            .apply_correction_at("DOC00001-R00002", CorrectionAction::Confirm, ts(3))
            .unwrap()
            .apply_correction_at("DOC00001-R00003", CorrectionAction::Correct { label: ClassLabel::NonFuncReq }, ts(4))
            .unwrap()
            .apply_correction_at("DOC00001-R00003", CorrectionAction::EditText { text: "edited".into() }, ts(5))
            .unwrap();
        let replayed = StoredDocument::replay(&doc.initial(), &doc.audit).unwrap();
        assert_eq!(serde_json::to_vec(&replayed).unwrap(), serde_json::to_vec(&doc).unwrap());
    }

    #[test]
    fn tampered_log_is_rejected() {
        let doc = extracted_doc()
            .apply_correction_at("DOC00001-R00003", CorrectionAction::Correct { label: ClassLabel::NonFuncReq }, ts(3))
            .unwrap();
        let mut events = doc.audit.clone();
        if let AuditEvent::Corrected { new, .. } = events.last_mut().unwrap() {
            new.corrected_type = Some(ClassLabel::Info);
        }
        assert!(StoredDocument::replay(&doc, &events).is_err());
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        let a = store.create("a.md", SourceMode::Markdown, "# 1 A\n".into()).unwrap();
        let b = store.create("b.txt", SourceMode::Plaintext, "1 B\n".into()).unwrap();
        assert_eq!((a.doc_id.as_str(), b.doc_id.as_str()), ("DOC00001", "DOC00002"));
        assert_eq!(store.load("DOC00002").unwrap(), b);
        assert_eq!(store.list().unwrap().len(), 2);
        assert!(matches!(store.load("DOC99999"), Err(Error::NotFound(_))));
        assert!(matches!(store.load("../etc"), Err(Error::NotFound(_))));

        let reopened = DocumentStore::open(dir.path()).unwrap();
        assert_eq!(reopened.list().unwrap().len(), 2);
        let failed = reopened.update("DOC00001", |_| Err(Error::invalid("no")));
        assert!(failed.is_err());
        assert_eq!(reopened.load("DOC00001").unwrap(), a);
    }

    #[test]
    fn concurrent_updates_to_one_document_are_serialized() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        let doc = store.create("a.md", SourceMode::Markdown, String::new()).unwrap();
        let extracted = extracted_doc();
        store
            .update(&doc.doc_id, |_| {
                Ok(StoredDocument {
                    doc_id: doc.doc_id.clone(),
                    filename: doc.filename.clone(),
                    source: doc.source.clone(),
                    ..extracted.clone()
                })
            })
            .unwrap();
        std::thread::scope(|s| {
            for i in 0..8 {
                let store = &store;
                s.spawn(move || {
                    let label = if i % 2 == 0 { ClassLabel::Info } else { ClassLabel::NonFuncReq };
                    store
                        .update("DOC00001", |d| {
                            d.apply_correction("DOC00001-R00002", CorrectionAction::Correct { label })
                                .or_else(|_| d.apply_correction("DOC00001-R00002", CorrectionAction::Confirm))
                        })
                        .unwrap();
                });
            }
        });
        let fin = store.load("DOC00001").unwrap();
        // Extraction + classification + 8 corrections, each audited.
        assert_eq!(fin.audit.len(), 10);
        let replayed = StoredDocument::replay(&fin, &fin.audit).unwrap();
        assert_eq!(replayed, fin);
    }
}
