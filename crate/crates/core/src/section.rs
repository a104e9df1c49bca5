//! Section titles, section tuples and the numbered row table.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::{detect_title_plaintext, parse_numbered_title};
use crate::model::{
    object_identifier, render_number, ExtractionResult, RequirementRow, SectionTitle, SectionTuple,
    SourceMode, TextUnit,
};

/// Reads a markdown heading unit as a section title.
///
/// The `#` run is stripped and the rest is parsed with the same number
/// grammar as plain-text titles. Headings without a number come back
/// `synthesized` with an empty path; [`assemble`] numbers them.
pub fn parse_section_title_md(unit: &TextUnit) -> Option<SectionTitle> {
    if unit.md_heading_depth == 0 {
        return None;
    }
    let rest = unit.text.get(unit.md_heading_depth as usize..)?.trim();
    if rest.is_empty() {
        return None;
    }
    Some(match parse_numbered_title(rest) {
        Some((raw_label, canonical_path, heading)) => SectionTitle {
            raw_label,
            canonical_path,
            heading,
            synthesized: false,
        },
        None => SectionTitle {
            raw_label: String::new(),
            canonical_path: Vec::new(),
            heading: rest.to_string(),
            synthesized: true,
        },
    })
}

/// Highest child ordinal seen under each parent path.
#[derive(Default)]
struct Ordinals(HashMap<Vec<u32>, u32>);

impl Ordinals {
    fn register(&mut self, path: &[u32]) {
        if let Some((&last, parent)) = path.split_last() {
            let slot = self.0.entry(parent.to_vec()).or_insert(0);
            *slot = (*slot).max(last);
        }
    }

    fn next_under(&self, parent: &[u32]) -> u32 {
        self.0.get(parent).copied().unwrap_or(0) + 1
    }
}

/// Groups units into section tuples in document order.
///
/// Units before the first title land in a `(preamble)` tuple numbered `0`.
/// Unnumbered markdown headings get the next free ordinal under the nearest
/// enclosing heading of smaller depth; explicit numbers are kept as written.
pub fn assemble(doc_id: &str, units: &[TextUnit], mode: SourceMode) -> ExtractionResult {
    let mut tuples: Vec<SectionTuple> = Vec::new();
    // (nesting depth, path) of the currently open titles.
    let mut open: Vec<(usize, Vec<u32>)> = Vec::new();
    let mut ordinals = Ordinals::default();

    for unit in units {
        let title = match mode {
            SourceMode::Markdown => parse_section_title_md(unit),
            SourceMode::Plaintext => detect_title_plaintext(unit),
        };
        match title {
            Some(mut title) => {
                let depth = match mode {
                    SourceMode::Markdown => unit.md_heading_depth as usize,
                    SourceMode::Plaintext => title.canonical_path.len(),
                };
                while open.last().is_some_and(|(d, _)| *d >= depth) {
                    open.pop();
                }
                if title.synthesized {
                    let mut path = open.last().map(|(_, p)| p.clone()).unwrap_or_default();
                    path.push(ordinals.next_under(&path));
                    title.canonical_path = path;
                }
                ordinals.register(&title.canonical_path);
                open.push((depth, title.canonical_path.clone()));
                tuples.push(SectionTuple {
                    title,
                    texts: Vec::new(),
                });
            }
            None => {
                if tuples.is_empty() {
                    let preamble = SectionTitle::preamble();
                    ordinals.register(&preamble.canonical_path);
                    tuples.push(SectionTuple {
                        title: preamble,
                        texts: Vec::new(),
                    });
                }
                tuples
                    .last_mut()
                    .expect("a tuple is open")
                    .texts
                    .push(unit.text.clone());
            }
        }
    }

    ExtractionResult {
        doc_id: doc_id.to_string(),
        tuples,
        removed_units: Vec::new(),
    }
}

/// One TITLE row per tuple followed by one TEXT row per text.
///
/// The j-th text (1-based) of a section numbered `p` is numbered `p.j`.
pub fn to_rows(extraction: &ExtractionResult) -> Result<Vec<RequirementRow>> {
    let mut by_path: HashMap<&[u32], Vec<&SectionTitle>> = HashMap::new();
    for tuple in &extraction.tuples {
        if tuple.title.canonical_path.is_empty() {
            return Err(Error::invalid(format!(
                "section {:?} has no number assigned",
                tuple.title.heading
            )));
        }
        by_path
            .entry(tuple.title.canonical_path.as_slice())
            .or_default()
            .push(&tuple.title);
    }
    let mut collisions: Vec<(&[u32], String)> = by_path
        .iter()
        .filter(|(_, titles)| titles.len() > 1)
        .map(|(path, titles)| {
            let names: Vec<String> = titles
                .iter()
                .map(|t| format!("{:?}", format!("{} {}", t.raw_label, t.heading).trim()))
                .collect();
            (*path, format!("{}: {}", render_number(path).unwrap_or_default(), names.join(", ")))
        })
        .collect();
    if !collisions.is_empty() {
        collisions.sort();
        return Err(Error::Numbering {
            collisions: collisions.into_iter().map(|(_, s)| s).collect(),
        });
    }

    let mut rows = Vec::new();
    let mut ordinal = 0;
    let mut next_id = || {
        ordinal += 1;
        object_identifier(&extraction.doc_id, ordinal)
    };
    for tuple in &extraction.tuples {
        let path = &tuple.title.canonical_path;
        rows.push(RequirementRow::title(next_id(), path, tuple.title.heading.clone())?);
        for (j, text) in tuple.texts.iter().enumerate() {
            let mut text_path = path.clone();
            text_path.push(j as u32 + 1);
            rows.push(RequirementRow::text(next_id(), &text_path, text.clone())?);
        }
    }
    Ok(rows)
}
