//! End-to-end extraction: units, header/footer removal, sections, rows.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classify::{preprocess, BaselineModel};
use crate::error::Result;
use crate::evalkit::{generate_corpus, generate_labeled_rows, hf_samples, GenConfig};
use crate::hf::{filter_units, ForestModel, ForestParams};
use crate::ingest::{to_units, PagedDocument};
use crate::model::{ExtractionResult, RequirementRow, TextUnit};
use crate::section::{assemble, to_rows};

/// Documents with fewer pages skip header/footer removal: with a single
/// page every line repeats on "every" page and frequency carries no signal.
pub const MIN_PAGES_FOR_HF: u32 = 2;

/// Everything `extract` produces; this is also the `extraction.json` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutput {
    pub units: Vec<TextUnit>,
    pub extraction: ExtractionResult,
    pub rows: Vec<RequirementRow>,
}

pub fn extract(doc: &PagedDocument, hf_model: &ForestModel, allowlist: &HashSet<String>) -> Result<ExtractionOutput> {
    let units = to_units(doc);
    let pages = units.iter().map(|u| u.page).max().unwrap_or(0);
    let (kept, removed) = if pages >= MIN_PAGES_FOR_HF {
        filter_units(&units, hf_model, allowlist)?
    } else {
        (units.clone(), Vec::new())
    };
    let mut extraction = assemble(&doc.doc_id, &kept, doc.source_mode);
    extraction.removed_units = removed;
    let rows = to_rows(&extraction)?;
    Ok(ExtractionOutput {
        units,
        extraction,
        rows,
    })
}

pub const DEFAULT_TRAINING_SEED: u64 = 20_240_601;

/// Header/footer forest trained on a fixed synthetic corpus, used when no
/// model file is supplied.
pub fn default_hf_model() -> Result<ForestModel> {
    let mut samples = Vec::new();
    for (pages, hf_lines) in [(3, 1), (8, 2), (12, 3), (20, 4)] {
        let cfg = GenConfig {
            docs: 6,
            pages_per_doc: pages,
            sections_per_doc: 4 * pages,
            texts_per_section: 3,
            hf_lines_per_page: hf_lines,
            hf_dropout: 0.1,
            no_requirement_rate: 0.05,
            title_noise_rate: 0.05,
            ..GenConfig::default()
        };
        samples.extend(hf_samples(&generate_corpus(DEFAULT_TRAINING_SEED + pages as u64, &cfg)?)?);
    }
    ForestModel::train(&samples, ForestParams::default())
}

/// Baseline classifier trained on synthetic labeled rows.
pub fn default_baseline() -> Result<BaselineModel> {
    let rows: Vec<_> = generate_labeled_rows(DEFAULT_TRAINING_SEED, 2000, 0.6)?
        .into_iter()
        .map(|r| (preprocess(&r.text), r.kind, r.label))
        .collect();
    BaselineModel::train(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hf::default_allowlist;
    use crate::ingest::read_paged;
    use crate::model::SourceMode;

    #[test]
    fn single_page_documents_keep_every_line() {
        let doc = read_paged("D", b"# 1 Scope\nfirst\nlast\n", SourceMode::Markdown).unwrap();
        let out = extract(&doc, &default_hf_model().unwrap(), &default_allowlist()).unwrap();
        assert!(out.extraction.removed_units.is_empty());
        assert_eq!(out.rows.len(), 3);
    }

    #[test]
    fn furniture_is_removed_from_paged_markdown() {
        let mut src = String::new();
        for p in 1..=4 {
            if p > 1 {
                src.push_str(&format!("<!-- page: {p} -->\n"));
            }
            src.push_str("ACME-778 Brake Specification\n");
            src.push_str(&format!("# {p} Section {p}\n"));
            for i in 0..6 {
                src.push_str(&format!("The unit shall handle case {} of chapter {}.\n", ["a", "b", "c", "d", "e", "f"][i], ["one", "two", "three", "four"][p - 1]));
            }
            src.push_str(&format!("Page {p} of 4\n"));
        }
        let doc = read_paged("D", src.as_bytes(), SourceMode::Markdown).unwrap();
        let out = extract(&doc, &default_hf_model().unwrap(), &default_allowlist()).unwrap();
        assert_eq!(out.extraction.removed_units.len(), 8, "{:#?}", out.extraction.removed_units);
        assert_eq!(out.extraction.tuples.len(), 4);
        assert!(out.extraction.tuples.iter().all(|t| t.texts.len() == 6));
    }
}
