//! Shared domain types: text units, section tuples and requirement rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the intermediate text representation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceMode {
    Markdown,
    Plaintext,
}

impl FromStr for SourceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(SourceMode::Markdown),
            "txt" | "text" | "plaintext" => Ok(SourceMode::Plaintext),
            other => Err(Error::invalid(format!("unknown source mode {other:?} (expected md or txt)"))),
        }
    }
}

/// One non-blank line of the intermediate representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextUnit {
    /// Line content as read, markdown markers included.
    pub text: String,
    /// 1-based page number.
    pub page: u32,
    /// 0-based index among the retained lines of the page.
    pub line_index: u32,
    /// Number of retained lines on the page.
    pub page_line_count: u32,
    /// Length of the leading `#` run of a markdown heading, 0 otherwise.
    pub md_heading_depth: u32,
    pub is_table_row: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectionTitle {
    /// The number as written in the source ("1.1", "IV", "A"); empty when synthesized.
    pub raw_label: String,
    pub canonical_path: Vec<u32>,
    pub heading: String,
    /// True when the number was assigned by the assembler rather than read.
    pub synthesized: bool,
}

impl SectionTitle {
    pub fn preamble() -> Self {
        SectionTitle {
            raw_label: String::new(),
            canonical_path: vec![0],
            heading: PREAMBLE_HEADING.to_string(),
            synthesized: true,
        }
    }
}

pub const PREAMBLE_HEADING: &str = "(preamble)";

/// A section title with the texts that follow it, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectionTuple {
    pub title: SectionTitle,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub doc_id: String,
    pub tuples: Vec<SectionTuple>,
    /// Units dropped as header/footer, kept for audit.
    pub removed_units: Vec<TextUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "HEADER")]
    Header,
    #[serde(rename = "INFO")]
    Info,
    #[serde(rename = "FUNC_REQ")]
    FuncReq,
    #[serde(rename = "NON_FUNC_REQ")]
    NonFuncReq,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Header,
        ClassLabel::Info,
        ClassLabel::FuncReq,
        ClassLabel::NonFuncReq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Header => "HEADER",
            ClassLabel::Info => "INFO",
            ClassLabel::FuncReq => "FUNC_REQ",
            ClassLabel::NonFuncReq => "NON_FUNC_REQ",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown class label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowKind {
    Title,
    Text,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Title => "TITLE",
            RowKind::Text => "TEXT",
        }
    }
}

impl FromStr for RowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TITLE" => Ok(RowKind::Title),
            "TEXT" => Ok(RowKind::Text),
            other => Err(Error::invalid(format!("unknown row kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReviewState {
    Unreviewed,
    Confirmed,
    Corrected,
}

impl ReviewState {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewState::Unreviewed => "UNREVIEWED",
            ReviewState::Confirmed => "CONFIRMED",
            ReviewState::Corrected => "CORRECTED",
        }
    }
}

impl FromStr for ReviewState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UNREVIEWED" => Ok(ReviewState::Unreviewed),
            "CONFIRMED" => Ok(ReviewState::Confirmed),
            "CORRECTED" => Ok(ReviewState::Corrected),
            other => Err(Error::invalid(format!("unknown review state {other:?}"))),
        }
    }
}

/// One row of the deployment table.
///
/// TITLE rows carry a heading and no text, TEXT rows the converse. The
/// level is always the component count of the number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementRow {
    pub object_identifier: String,
    pub object_number: String,
    pub object_heading: String,
    pub object_text: String,
    pub object_level: u32,
    pub kind: RowKind,
    pub object_type: Option<ClassLabel>,
    pub confidence: Option<f64>,
    pub review_state: ReviewState,
    pub corrected_type: Option<ClassLabel>,
}

impl RequirementRow {
    pub fn title(identifier: String, path: &[u32], heading: impl Into<String>) -> Result<Self> {
        Ok(RequirementRow {
            object_identifier: identifier,
            object_number: render_number(path)?,
            object_heading: heading.into(),
            object_text: String::new(),
            object_level: path.len() as u32,
            kind: RowKind::Title,
            object_type: None,
            confidence: None,
            review_state: ReviewState::Unreviewed,
            corrected_type: None,
        })
    }

    pub fn text(identifier: String, path: &[u32], text: impl Into<String>) -> Result<Self> {
        Ok(RequirementRow {
            object_identifier: identifier,
            object_number: render_number(path)?,
            object_heading: String::new(),
            object_text: text.into(),
            object_level: path.len() as u32,
            kind: RowKind::Text,
            object_type: None,
            confidence: None,
            review_state: ReviewState::Unreviewed,
            corrected_type: None,
        })
    }

    /// The string the classifier sees: the heading for TITLE rows, the text otherwise.
    pub fn content(&self) -> &str {
        match self.kind {
            RowKind::Title => &self.object_heading,
            RowKind::Text => &self.object_text,
        }
    }

    /// The label that currently applies, a human correction taking precedence.
    pub fn effective_type(&self) -> Option<ClassLabel> {
        self.corrected_type.or(self.object_type)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.object_identifier;
        if id.is_empty() {
            return Err(Error::invalid("empty object_identifier"));
        }
        let level = object_level(&self.object_number)?;
        if level != self.object_level {
            return Err(Error::invalid(format!(
                "{id}: object_level {} does not match number {:?}",
                self.object_level, self.object_number
            )));
        }
        match self.kind {
            RowKind::Title if self.object_heading.is_empty() || !self.object_text.is_empty() => {
                return Err(Error::invalid(format!("{id}: TITLE row needs a heading and no text")));
            }
            RowKind::Text if self.object_text.is_empty() || !self.object_heading.is_empty() => {
                return Err(Error::invalid(format!("{id}: TEXT row needs a text and no heading")));
            }
            _ => {}
        }
        if (self.review_state == ReviewState::Corrected) != self.corrected_type.is_some() {
            return Err(Error::invalid(format!(
                "{id}: corrected_type must be set exactly when review_state is CORRECTED"
            )));
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::invalid(format!("{id}: confidence {c} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Every row carries an `object_type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalOutput {
    pub doc_id: String,
    pub rows: Vec<RequirementRow>,
}

/// Joins a numeric section path with dots.
///
/// A leading `0` is accepted since the preamble section is numbered `[0]`.
pub fn render_number(path: &[u32]) -> Result<String> {
    if path.is_empty() {
        return Err(Error::invalid("cannot render an empty section path"));
    }
    let parts: Vec<String> = path.iter().map(u32::to_string).collect();
    Ok(parts.join("."))
}

/// Inverse of [`render_number`].
pub fn parse_number(number: &str) -> Result<Vec<u32>> {
    if number.is_empty() {
        return Err(Error::invalid("empty section number"));
    }
    number
        .split('.')
        .map(|part| {
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::invalid(format!("malformed section number {number:?}")));
            }
            part.parse::<u32>()
                .map_err(|_| Error::invalid(format!("section number component out of range in {number:?}")))
        })
        .collect()
}

/// Depth of a dotted-decimal number in the numbering hierarchy.
pub fn object_level(number: &str) -> Result<u32> {
    parse_number(number).map(|p| p.len() as u32)
}

/// `<doc_id>-R<5-digit ordinal>`, ordinals starting at 1.
pub fn object_identifier(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}-R{ordinal:05}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_examples() {
        assert_eq!(render_number(&[1, 1]).unwrap(), "1.1");
        assert_eq!(render_number(&[1]).unwrap(), "1");
        assert_eq!(render_number(&[2, 3, 1]).unwrap(), "2.3.1");
        assert!(matches!(render_number(&[]), Err(Error::InvalidArgument(_))));
    }

    // Exhaustive round trip over every path with components 1..=4 and depth 1..=4.
    #[test]
    fn render_parse_round_trip_exhaustive() {
        fn paths(depth: usize) -> Vec<Vec<u32>> {
            if depth == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for prefix in paths(depth - 1) {
                for c in 1..=4 {
                    let mut p = prefix.clone();
                    p.push(c);
                    out.push(p);
                }
            }
            out
        }
        let mut count = 0;
        for depth in 1..=4 {
            for p in paths(depth) {
                let s = render_number(&p).unwrap();
                assert_eq!(parse_number(&s).unwrap(), p);
                assert_eq!(object_level(&s).unwrap() as usize, p.len());
                count += 1;
            }
        }
        assert_eq!(count, 4 + 16 + 64 + 256);
    }

    #[test]
    fn level_examples() {
        assert_eq!(object_level("1").unwrap(), 1);
        assert_eq!(object_level("1.1.2").unwrap(), 3);
        assert_eq!(object_level("10.2.3.4").unwrap(), "10.2.3.4".split('.').count() as u32);
        for bad in ["", "1..2", ".1", "1.", "1.a", "IV", "1 .2"] {
            assert!(object_level(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn identifiers_are_zero_padded() {
        assert_eq!(object_identifier("D1", 1), "D1-R00001");
        assert_eq!(object_identifier("doc", 12345), "doc-R12345");
    }

    #[test]
    fn row_invariants() {
        let mut row = RequirementRow::title("D-R00001".into(), &[1, 2], "Scope").unwrap();
        assert_eq!(row.object_level, 2);
        row.validate().unwrap();

        row.object_text = "stray".into();
        assert!(row.validate().is_err());
        row.object_text.clear();

        row.review_state = ReviewState::Corrected;
        assert!(row.validate().is_err());
        row.corrected_type = Some(ClassLabel::Info);
        row.validate().unwrap();

        row.object_level = 3;
        assert!(row.validate().is_err());
    }

    #[test]
    fn labels_parse_and_print() {
        for l in ClassLabel::ALL {
            assert_eq!(l.as_str().parse::<ClassLabel>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!("OTHER".parse::<ClassLabel>().is_err());
    }
}
