//! CSV, JSON and YAML interchange for requirement rows.
//!
//! The CSV leads with the six deployment columns (`Object Identifier` ..
//! `Object Type`) and carries the review fields in four trailing columns so
//! that a file read back yields the same rows. JSON and YAML hold a list of
//! objects keyed by the snake_case row field names. Output is UTF-8 without
//! BOM, with LF line endings.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ClassLabel, RequirementRow, ReviewState, RowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExportFormat {
    Csv,
    Json,
    Yaml,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [ExportFormat::Csv, ExportFormat::Json, ExportFormat::Yaml];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
            ExportFormat::Yaml => "yaml",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv; charset=utf-8",
            ExportFormat::Json => "application/json",
            ExportFormat::Yaml => "application/yaml",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "yaml" | "yml" => Ok(ExportFormat::Yaml),
            other => Err(Error::invalid(format!("unknown export format {other:?}"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "Object Identifier",
    "Object Number",
    "Object Heading",
    "Object Text",
    "Object Level",
    "Object Type",
    "Kind",
    "Confidence",
    "Review State",
    "Corrected Type",
];

pub fn write(rows: &[RequirementRow], format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => write_csv(rows),
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(rows).expect("rows serialize");
            out.push(b'\n');
            out
        }
        ExportFormat::Yaml => serde_yaml::to_string(rows).expect("rows serialize").into_bytes(),
    }
}

pub fn read(bytes: &[u8], format: ExportFormat) -> Result<Vec<RequirementRow>> {
    let rows: Vec<RequirementRow> = match format {
        ExportFormat::Csv => return read_csv(bytes),
        ExportFormat::Json => serde_json::from_slice(bytes).map_err(|e| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?,
        ExportFormat::Yaml => serde_yaml::from_slice(bytes).map_err(|e| {
            let location = e
                .location()
                .map(|l| format!("line {} column {}", l.line(), l.column()))
                .unwrap_or_else(|| "document".to_string());
            Error::parse(location, e.to_string())
        })?,
    };
    for (i, row) in rows.iter().enumerate() {
        row.validate()
            .map_err(|e| Error::parse(format!("row {}", i + 1), e.to_string()))?;
    }
    Ok(rows)
}

fn label_str(label: Option<ClassLabel>) -> &'static str {
    label.map(ClassLabel::as_str).unwrap_or("")
}

fn write_csv(rows: &[RequirementRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        let level = r.object_level.to_string();
        let confidence = r.confidence.map(|c| c.to_string()).unwrap_or_default();
        w.write_record([
            r.object_identifier.as_str(),
            &r.object_number,
            &r.object_heading,
            &r.object_text,
            &level,
            label_str(r.object_type),
            r.kind.as_str(),
            &confidence,
            r.review_state.as_str(),
            label_str(r.corrected_type),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn read_csv(bytes: &[u8]) -> Result<Vec<RequirementRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    let mut columns = [0usize; CSV_COLUMNS.len()];
    for (slot, name) in columns.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("line 1", format!("missing column {name:?}")))?;
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(columns[i]).unwrap_or("");
        let at = |i: usize| format!("line {line}, field {:?}", CSV_COLUMNS[i]);
        let opt_label = |i: usize| -> Result<Option<ClassLabel>> {
            match field(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|e: Error| Error::parse(at(i), e.to_string())),
            }
        };

        let row = RequirementRow {
            object_identifier: field(0).to_string(),
            object_number: field(1).to_string(),
            object_heading: field(2).to_string(),
            object_text: field(3).to_string(),
            object_level: field(4)
                .parse()
                .map_err(|_| Error::parse(at(4), format!("not an integer: {:?}", field(4))))?,
            object_type: opt_label(5)?,
            kind: field(6)
                .parse::<RowKind>()
                .map_err(|e| Error::parse(at(6), e.to_string()))?,
            confidence: match field(7) {
                "" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(at(7), format!("not a number: {s:?}")))?,
                ),
            },
            review_state: field(8)
                .parse::<ReviewState>()
                .map_err(|e| Error::parse(at(8), e.to_string()))?,
            corrected_type: opt_label(9)?,
        };
        row.validate()
            .map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}
