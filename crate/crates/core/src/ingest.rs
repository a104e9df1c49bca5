//! Intermediate text representation: paged lines and the units built from them.
//!
//! Two inputs are accepted. Markdown from a layout-aware converter marks
//! headings with `#` runs and keeps table rows as `|a|b|` lines; pages are
//! separated by `<!-- page: N -->` comment lines or form feeds. Plain text
//! from a flat converter only has form feeds, and section titles have to be
//! recognised by their leading number (see [`detect_title_plaintext`]).

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SectionTitle, SourceMode, TextUnit};

const FORM_FEED: char = '\u{000C}';

/// Dotted-decimal numbers deeper than this are not treated as titles.
pub const MAX_NUMBER_DEPTH: usize = 6;

static PAGE_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*<!--\s*page:\s*\d+\s*-->\s*$").unwrap());
static DOTTED_TITLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+(?:\.\d+)*)\.?\s+(\S.*)$").unwrap());
static ROMAN_TITLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([IVX]+)[.)]\s+(\S.*)$").unwrap());
static ALPHA_TITLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Z])[.)]\s+(\S.*)$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PagedDocument {
    pub doc_id: String,
    pub pages: Vec<Vec<String>>,
    pub source_mode: SourceMode,
}

impl PagedDocument {
    /// Serializes back to the text form accepted by [`read_paged`].
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (i, page) in self.pages.iter().enumerate() {
            if i > 0 {
                match self.source_mode {
                    SourceMode::Markdown => {
                        out.push_str(&format!("<!-- page: {} -->\n", i + 1));
                    }
                    SourceMode::Plaintext => {
                        if out.ends_with('\n') {
                            out.pop();
                        }
                        out.push(FORM_FEED);
                    }
                }
            }
            for line in page {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

/// Splits UTF-8 input into pages of raw lines.
///
/// Form feeds separate pages in both modes; in markdown mode a
/// `<!-- page: N -->` line does too. Delimiters are consumed. CRLF is
/// normalized to LF.
pub fn read_paged(doc_id: &str, input: &[u8], mode: SourceMode) -> Result<PagedDocument> {
    let text = std::str::from_utf8(input)?;
    if text.is_empty() {
        return Err(Error::Structure("document has no pages".into()));
    }
    let text = text.replace("\r\n", "\n");

    let mut pages = Vec::new();
    for chunk in text.split(FORM_FEED) {
        let mut page = Vec::new();
        for line in chunk.lines() {
            if mode == SourceMode::Markdown && PAGE_MARKER.is_match(line) {
                pages.push(std::mem::take(&mut page));
            } else {
                page.push(line.to_string());
            }
        }
        pages.push(page);
    }

    Ok(PagedDocument {
        doc_id: doc_id.to_string(),
        pages,
        source_mode: mode,
    })
}

/// One unit per non-blank line, numbered within its page.
pub fn to_units(doc: &PagedDocument) -> Vec<TextUnit> {
    let markdown = doc.source_mode == SourceMode::Markdown;
    let mut units = Vec::new();
    for (page_idx, page) in doc.pages.iter().enumerate() {
        let kept: Vec<&String> = page.iter().filter(|l| !l.trim().is_empty()).collect();
        let count = kept.len() as u32;
        for (i, line) in kept.into_iter().enumerate() {
            let (depth, table) = if markdown {
                (heading_depth(line), line.trim_start().starts_with('|'))
            } else {
                (0, false)
            };
            units.push(TextUnit {
                text: line.clone(),
                page: page_idx as u32 + 1,
                line_index: i as u32,
                page_line_count: count,
                md_heading_depth: depth,
                is_table_row: table,
            });
        }
    }
    units
}

/// Length of the leading `#` run when it is followed by whitespace.
fn heading_depth(line: &str) -> u32 {
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    if hashes == 0 {
        return 0;
    }
    match line[hashes..].chars().next() {
        Some(c) if c.is_whitespace() => hashes as u32,
        _ => 0,
    }
}

/// Recognises a section title in flat text by its leading number.
///
/// Accepted forms: dotted decimal followed by whitespace and text
/// (`1.4 Requirements`, `2.1. Scope`), a roman numeral I–XXXIX followed by
/// `.` or `)` (`IV. Security`), or one capital letter followed by `.` or
/// `)` (`A) Overview`). I, V and X read as roman numerals.
pub fn detect_title_plaintext(unit: &TextUnit) -> Option<SectionTitle> {
    let (raw_label, canonical_path, heading) = parse_numbered_title(&unit.text)?;
    Some(SectionTitle {
        raw_label,
        canonical_path,
        heading,
        synthesized: false,
    })
}

/// Shared number grammar for plain-text lines and markdown heading bodies.
pub(crate) fn parse_numbered_title(line: &str) -> Option<(String, Vec<u32>, String)> {
    let line = line.trim();

    if let Some(caps) = DOTTED_TITLE.captures(line) {
        let label = &caps[1];
        let path: Option<Vec<u32>> = label.split('.').map(|p| p.parse().ok()).collect();
        let path = path?;
        if path.len() > MAX_NUMBER_DEPTH {
            return None;
        }
        return Some((label.to_string(), path, caps[2].trim_end().to_string()));
    }
    if let Some(caps) = ROMAN_TITLE.captures(line) {
        if let Some(value) = roman_value(&caps[1]) {
            return Some((caps[1].to_string(), vec![value], caps[2].trim_end().to_string()));
        }
    }
    if let Some(caps) = ALPHA_TITLE.captures(line) {
        let letter = caps[1].as_bytes()[0];
        let ordinal = u32::from(letter - b'A') + 1;
        return Some((caps[1].to_string(), vec![ordinal], caps[2].trim_end().to_string()));
    }
    None
}

/// Value of a canonical roman numeral in 1..=39.
pub fn roman_value(s: &str) -> Option<u32> {
    (1..=39).find(|&n| to_roman(n) == s)
}

fn to_roman(mut n: u32) -> String {
    let mut out = String::new();
    for (value, digits) in [(10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")] {
        while n >= value {
            out.push_str(digits);
            n -= value;
        }
    }
    out
}
