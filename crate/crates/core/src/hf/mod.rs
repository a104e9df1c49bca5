//! Header/footer detection and removal.
//!
//! Every unit is described by two layout-independent features:
//!
//! * `frequency`: the share of the document's pages that contain a unit with
//!   the same normalized text,
//! * `position`: the unit's relative line position on its page, 0 at the top
//!   and 1 at the bottom.
//!
//! A [`ForestModel`] trained on labeled units predicts which ones are page
//! furniture, and [`filter_units`] drops them.

mod forest;
mod labels;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TextUnit;

pub use forest::{bootstrap_indices, DecisionTree, ForestModel, ForestParams, Node, MODEL_FORMAT_VERSION};
pub use labels::{corpus_label_units, read_label_csv, training_samples, write_label_csv, LabeledUnit, LABEL_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfFeatures {
    pub frequency: f64,
    pub position: f64,
}

impl HfFeatures {
    pub fn as_array(&self) -> [f64; 2] {
        [self.frequency, self.position]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HfLabel {
    HeaderFooter,
    ReqText,
}

impl HfLabel {
    pub fn index(self) -> usize {
        match self {
            HfLabel::HeaderFooter => 0,
            HfLabel::ReqText => 1,
        }
    }

    /// Parses the short labels used in training CSVs (`HF` / `TEXT`).
    pub fn from_short(s: &str) -> Result<Self> {
        match s.trim() {
            "HF" | "HEADER_FOOTER" => Ok(HfLabel::HeaderFooter),
            "TEXT" | "REQ_TEXT" => Ok(HfLabel::ReqText),
            other => Err(Error::invalid(format!("unknown header/footer label {other:?}"))),
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            HfLabel::HeaderFooter => "HF",
            HfLabel::ReqText => "TEXT",
        }
    }
}

/// Phrases that repeat across sections but are real content.
pub const DEFAULT_ALLOWLIST: [&str; 3] = ["no requirement", "not applicable", "n.a."];

pub fn default_allowlist() -> HashSet<String> {
    DEFAULT_ALLOWLIST.iter().map(|s| normalize_text(s)).collect()
}

/// Reads an allowlist file: one phrase per line, blank lines ignored.
pub fn parse_allowlist(contents: &str) -> HashSet<String> {
    contents
        .lines()
        .map(normalize_text)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Lowercases, collapses whitespace runs and folds every run of ASCII digits
/// to a single `0`, so running page counters compare equal.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        let mut in_digits = false;
        for c in word.chars() {
            if c.is_ascii_digit() {
                if !in_digits {
                    out.push('0');
                }
                in_digits = true;
            } else {
                out.extend(c.to_lowercase());
                in_digits = false;
            }
        }
    }
    out
}

/// Features for every unit, aligned with the input.
///
/// The page count is the highest page number present.
pub fn compute_features(units: &[TextUnit]) -> Result<Vec<HfFeatures>> {
    if units.is_empty() {
        return Err(Error::invalid("cannot compute features of an empty unit list"));
    }
    let total_pages = units.iter().map(|u| u.page).max().unwrap_or(1).max(1);

    let keys: Vec<String> = units.iter().map(|u| normalize_text(&u.text)).collect();
    let mut pages_by_key: HashMap<&str, BTreeSet<u32>> = HashMap::new();
    for (key, unit) in keys.iter().zip(units) {
        pages_by_key.entry(key.as_str()).or_default().insert(unit.page);
    }

    units
        .iter()
        .zip(&keys)
        .map(|(unit, key)| {
            if unit.page_line_count == 0 || unit.line_index >= unit.page_line_count {
                return Err(Error::invalid(format!(
                    "unit on page {} has line_index {} of {}",
                    unit.page, unit.line_index, unit.page_line_count
                )));
            }
            let frequency = pages_by_key[key.as_str()].len() as f64 / f64::from(total_pages);
            let position = f64::from(unit.line_index) / f64::from((unit.page_line_count - 1).max(1));
            Ok(HfFeatures {
                frequency: frequency.min(1.0),
                position,
            })
        })
        .collect()
}

/// Splits units into `(kept, removed)`, recomputing features from `units`.
pub fn filter_units(
    units: &[TextUnit],
    model: &ForestModel,
    allowlist: &HashSet<String>,
) -> Result<(Vec<TextUnit>, Vec<TextUnit>)> {
    if units.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let features = compute_features(units)?;
    filter_with_features(units, &features, model, allowlist)
}

/// Like [`filter_units`] with precomputed features.
///
/// A unit is removed iff the model calls it HEADER_FOOTER, it is not a
/// markdown heading, and its normalized text is not allowlisted.
pub fn filter_with_features(
    units: &[TextUnit],
    features: &[HfFeatures],
    model: &ForestModel,
    allowlist: &HashSet<String>,
) -> Result<(Vec<TextUnit>, Vec<TextUnit>)> {
    if units.len() != features.len() {
        return Err(Error::invalid(format!(
            "{} units but {} feature vectors",
            units.len(),
            features.len()
        )));
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (unit, f) in units.iter().zip(features) {
        let (label, _) = model.predict(f)?;
        let protected = unit.md_heading_depth > 0 || allowlist.contains(&normalize_text(&unit.text));
        if label == HfLabel::HeaderFooter && !protected {
            removed.push(unit.clone());
        } else {
            kept.push(unit.clone());
        }
    }
    Ok((kept, removed))
}
