//! Requirement type labelling of extracted rows.
//!
//! Rows are labelled either by the built-in [`BaselineModel`] or by an
//! external model server speaking the JSON wire protocol in [`wire`].
//! Human corrections always win over model output.

mod baseline;
mod preprocess;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, FinalOutput, RequirementRow, ReviewState, RowKind};

pub use baseline::{BaselineModel, DEFAULT_TITLE_HEADER_WEIGHT};
pub use preprocess::{preprocess, stopwords, TokenSeq, RETAINED, STOPWORDS_VERSION};
pub use wire::RowLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierBinding {
    Builtin { model: BaselineModel },
    External { endpoint: String, timeout_ms: u64 },
}

pub fn train_baseline(rows: &[(TokenSeq, RowKind, ClassLabel)]) -> Result<BaselineModel> {
    BaselineModel::train(rows)
}

/// Trains on rows that already carry a label, e.g. a reviewed export.
pub fn train_from_rows(rows: &[RequirementRow]) -> Result<BaselineModel> {
    let samples: Vec<_> = rows
        .iter()
        .filter_map(|r| r.effective_type().map(|l| (preprocess(r.content()), r.kind, l)))
        .collect();
    BaselineModel::train(&samples)
}

/// Labels every row. Output rows keep the input order and identifiers.
///
/// On an external failure the error carries all rows, labelled where the
/// server answered.
pub fn classify_rows(
    binding: &ClassifierBinding,
    doc_id: &str,
    rows: &[RequirementRow],
) -> Result<FinalOutput> {
    if rows.is_empty() {
        return Err(Error::invalid("nothing to classify"));
    }
    let labels = match binding {
        ClassifierBinding::Builtin { model } => rows
            .iter()
            .map(|row| {
                let (label, confidence) = model.predict(&preprocess(row.content()), row.kind);
                RowLabel {
                    id: row.object_identifier.clone(),
                    label,
                    confidence,
                }
            })
            .collect(),
        ClassifierBinding::External {
            endpoint,
            timeout_ms,
        } => match wire::classify_remote(endpoint, *timeout_ms, rows) {
            Ok(labels) => labels,
            Err(wire::RemoteError { message, answered }) => {
                let mut partial = rows.to_vec();
                apply_labels(&mut partial, &answered)?;
                return Err(Error::Classification {
                    message,
                    partial: Box::new(partial),
                });
            }
        },
    };
    let mut out = rows.to_vec();
    apply_labels(&mut out, &labels)?;
    Ok(FinalOutput {
        doc_id: doc_id.to_string(),
        rows: out,
    })
}

/// Writes model labels into rows, matched by identifier.
///
/// CORRECTED rows keep their human label at confidence 1. A CONFIRMED row
/// whose label changes goes back to UNREVIEWED. Rows without a label in
/// `labels` are left untouched.
pub fn apply_labels(rows: &mut [RequirementRow], labels: &[RowLabel]) -> Result<()> {
    let index: std::collections::HashMap<String, usize> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.object_identifier.clone(), i))
        .collect();
    let targets = labels
        .iter()
        .map(|l| {
            index
                .get(l.id.as_str())
                .copied()
                .ok_or_else(|| Error::NotFound(format!("row {}", l.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    for (l, i) in labels.iter().zip(targets) {
        let row = &mut rows[i];
        match row.review_state {
            ReviewState::Corrected => {
                row.object_type = row.corrected_type;
                row.confidence = Some(1.0);
            }
            state => {
                if state == ReviewState::Confirmed && row.object_type != Some(l.label) {
                    row.review_state = ReviewState::Unreviewed;
                }
                row.object_type = Some(l.label);
                row.confidence = Some(l.confidence.clamp(0.0, 1.0));
            }
        }
    }
    Ok(())
}
