//! Labeled-unit CSV files: `doc,page,line_index,text,label` with label `HF` or `TEXT`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{compute_features, HfFeatures, HfLabel};
use crate::error::{Error, Result};
use crate::evalkit::Corpus;
use crate::ingest::to_units;
use crate::model::TextUnit;

pub const LABEL_COLUMNS: [&str; 5] = ["doc", "page", "line_index", "text", "label"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUnit {
    pub doc: String,
    pub page: u32,
    pub line_index: u32,
    pub text: String,
    pub label: HfLabel,
}

pub fn write_label_csv(units: &[LabeledUnit]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(LABEL_COLUMNS).expect("in-memory write");
    for u in units {
        w.write_record([
            u.doc.as_str(),
            &u.page.to_string(),
            &u.line_index.to_string(),
            &u.text,
            u.label.short(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_label_csv(bytes: &[u8]) -> Result<Vec<LabeledUnit>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::parse("line 1", e.to_string()))?.clone();
    let mut columns = [0usize; LABEL_COLUMNS.len()];
    for (slot, name) in columns.iter_mut().zip(LABEL_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse("line 1", format!("missing column {name:?}")))?;
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(columns[i]).unwrap_or("");
        let at = |i: usize| format!("line {line}, field {:?}", LABEL_COLUMNS[i]);
        let page: u32 = field(1)
            .trim()
            .parse()
            .map_err(|_| Error::parse(at(1), format!("not an integer: {:?}", field(1))))?;
        if page == 0 {
            return Err(Error::parse(at(1), "pages are numbered from 1"));
        }
        out.push(LabeledUnit {
            doc: field(0).to_string(),
            page,
            line_index: field(2)
                .trim()
                .parse()
                .map_err(|_| Error::parse(at(2), format!("not an integer: {:?}", field(2))))?,
            text: field(3).to_string(),
            label: HfLabel::from_short(field(4).trim()).map_err(|e| Error::parse(at(4), e.to_string()))?,
        });
    }
    Ok(out)
}

/// Every unit of every generated document with its true label.
pub fn corpus_label_units(corpus: &Corpus) -> Vec<LabeledUnit> {
    let mut out = Vec::new();
    for d in &corpus.documents {
        for (unit, label) in to_units(&d.doc).into_iter().zip(&d.truth.hf_labels) {
            out.push(LabeledUnit {
                doc: d.truth.doc_id.clone(),
                page: unit.page,
                line_index: unit.line_index,
                text: unit.text,
                label: *label,
            });
        }
    }
    out
}

/// Features computed per document; a page's line count is its highest
/// `line_index` plus one.
pub fn training_samples(units: &[LabeledUnit]) -> Result<Vec<(HfFeatures, HfLabel)>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_doc: HashMap<&str, Vec<&LabeledUnit>> = HashMap::new();
    for u in units {
        by_doc
            .entry(u.doc.as_str())
            .or_insert_with(|| {
                order.push(u.doc.as_str());
                Vec::new()
            })
            .push(u);
    }
    let mut out = Vec::with_capacity(units.len());
    for doc in order {
        let members = &by_doc[doc];
        let mut line_counts: HashMap<u32, u32> = HashMap::new();
        for u in members {
            let count = line_counts.entry(u.page).or_default();
            *count = (*count).max(u.line_index + 1);
        }
        let text_units: Vec<TextUnit> = members
            .iter()
            .map(|u| TextUnit {
                text: u.text.clone(),
                page: u.page,
                line_index: u.line_index,
                page_line_count: line_counts[&u.page],
                md_heading_depth: 0,
                is_table_row: false,
            })
            .collect();
        let features = compute_features(&text_units)?;
        out.extend(features.into_iter().zip(members.iter().map(|u| u.label)));
    }
    Ok(out)
}
