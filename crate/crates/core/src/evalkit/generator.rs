//! Synthetic requirement documents with known structure.
//!
//! Each document is a numbered section tree whose texts are drawn from
//! class-specific vocabularies, laid out over pages framed by running
//! headers and footers with page counters. The generator records which
//! units are page furniture, the label of every row, and the extraction a
//! correct pipeline must produce.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hf::{compute_features, normalize_text, HfFeatures, HfLabel};
use crate::ingest::{to_units, PagedDocument};
use crate::model::{
    ClassLabel, ExtractionResult, RequirementRow, RowKind, SectionTitle, SectionTuple, SourceMode,
};
use crate::section::to_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub docs: usize,
    pub pages_per_doc: usize,
    pub sections_per_doc: usize,
    pub texts_per_section: usize,
    /// Header plus footer lines on every page (top half first), at most 6.
    pub hf_lines_per_page: usize,
    /// Probability that a text word comes from its class vocabulary.
    pub class_vocab_separation: f64,
    /// Probability that a text starts with a number, like a section title.
    pub title_noise_rate: f64,
    /// Probability that a text is "No Requirement" or a sibling phrase.
    pub no_requirement_rate: f64,
    /// Probability that a given header/footer line is missing from a page.
    pub hf_dropout: f64,
    /// Probability that a markdown heading is written without its number.
    pub unnumbered_heading_rate: f64,
    pub mode: SourceMode,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            docs: 1,
            pages_per_doc: 5,
            sections_per_doc: 12,
            texts_per_section: 3,
            hf_lines_per_page: 2,
            class_vocab_separation: 0.6,
            title_noise_rate: 0.0,
            no_requirement_rate: 0.0,
            hf_dropout: 0.0,
            unnumbered_heading_rate: 0.0,
            mode: SourceMode::Markdown,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.docs < 1 || self.pages_per_doc < 1 || self.sections_per_doc < 1 {
            return Err(Error::invalid("docs, pages_per_doc and sections_per_doc must be at least 1"));
        }
        if self.hf_lines_per_page > 6 {
            return Err(Error::invalid("hf_lines_per_page must be at most 6"));
        }
        for (name, p) in [
            ("class_vocab_separation", self.class_vocab_separation),
            ("title_noise_rate", self.title_noise_rate),
            ("no_requirement_rate", self.no_requirement_rate),
            ("hf_dropout", self.hf_dropout),
            ("unnumbered_heading_rate", self.unnumbered_heading_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.unnumbered_heading_rate > 0.0 && self.mode == SourceMode::Plaintext {
            return Err(Error::invalid("unnumbered headings need markdown mode"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTruth {
    pub doc_id: String,
    /// One label per unit of `to_units(doc)`.
    pub hf_labels: Vec<HfLabel>,
    /// One label per row of `to_rows(extraction)`.
    pub row_labels: Vec<ClassLabel>,
    pub extraction: ExtractionResult,
}

impl DocTruth {
    /// Expected rows with `object_type` set from the truth labels.
    pub fn labeled_rows(&self) -> Result<Vec<RequirementRow>> {
        let mut rows = to_rows(&self.extraction)?;
        for (row, label) in rows.iter_mut().zip(&self.row_labels) {
            row.object_type = Some(*label);
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDoc {
    pub doc: PagedDocument,
    pub truth: DocTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub seed: u64,
    pub config: GenConfig,
    pub documents: Vec<GeneratedDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub kind: RowKind,
    pub label: ClassLabel,
}

const SHARED: &[&str] = &[
    "module", "interface", "signal", "value", "data", "unit", "component", "vehicle", "controller",
    "input", "output", "message", "parameter", "state", "mode", "function", "network", "sensor",
    "display", "driver", "system", "shall", "the", "of", "when", "each", "channel", "frame",
];
const INFO_WORDS: &[&str] = &[
    "describes", "overview", "background", "purpose", "document", "context", "informative",
    "example", "note", "reference", "explains", "introduces", "summary", "glossary", "chapter",
    "illustrates", "history", "rationale", "terminology", "annex",
];
const FUNC_WORDS: &[&str] = &[
    "transmit", "activate", "store", "send", "receive", "calculate", "trigger", "show", "set",
    "reset", "request", "acknowledge", "enable", "disable", "switch", "report", "forward",
    "initialize", "unlock", "record",
];
const NFR_WORDS: &[&str] = &[
    "latency", "milliseconds", "availability", "reliability", "performance", "secure", "encrypted",
    "within", "percent", "uptime", "throughput", "robust", "temperature", "tolerance", "response",
    "maintainable", "scalable", "efficiency", "durability", "compliance",
];
const HEADER_WORDS: &[&str] = &[
    "Overview", "Architecture", "Interfaces", "Requirements", "Diagnostics", "Timing", "Safety",
    "Communication", "Power", "Management", "Configuration", "Startup", "Shutdown", "Scope",
    "Definitions", "Lighting", "Climate", "Braking", "Steering", "Body",
];
const NO_REQUIREMENT: &[&str] = &["No Requirement", "Not Applicable", "N.A."];
const COMPANIES: &[&str] = &["Acme Automotive", "Nordwerk Systems", "Helix Mobility", "Orbis Motors"];

fn class_words(label: ClassLabel) -> &'static [&'static str] {
    match label {
        ClassLabel::Header => HEADER_WORDS,
        ClassLabel::Info => INFO_WORDS,
        ClassLabel::FuncReq => FUNC_WORDS,
        ClassLabel::NonFuncReq => NFR_WORDS,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentence(rng: &mut ChaCha8Rng, label: ClassLabel, separation: f64) -> String {
    let len = rng.random_range(6..=12);
    let words: Vec<&str> = (0..len)
        .map(|_| {
            let pool = if rng.random_bool(separation) { class_words(label) } else { SHARED };
            *pool.choose(rng).expect("non-empty pool")
        })
        .collect();
    format!("{}.", capitalize(&words.join(" ")))
}

fn heading(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| *HEADER_WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn text_label(rng: &mut ChaCha8Rng) -> ClassLabel {
    let x: f64 = rng.random();
    if x < 0.30 {
        ClassLabel::Info
    } else if x < 0.75 {
        ClassLabel::FuncReq
    } else {
        ClassLabel::NonFuncReq
    }
}

fn next_path(rng: &mut ChaCha8Rng, prev: Option<&Vec<u32>>) -> Vec<u32> {
    let Some(prev) = prev else {
        return vec![1];
    };
    let mut path = prev.clone();
    let x: f64 = rng.random();
    if x < 0.3 && path.len() < 3 {
        path.push(1);
    } else if x < 0.5 && path.len() > 1 {
        path.pop();
        *path.last_mut().expect("non-empty") += 1;
    } else {
        *path.last_mut().expect("non-empty") += 1;
    }
    path
}

struct Section {
    title: SectionTitle,
    line: String,
    texts: Vec<(String, ClassLabel)>,
}

fn generate_doc(rng: &mut ChaCha8Rng, doc_id: &str, cfg: &GenConfig) -> Result<GeneratedDoc> {
    let markdown = cfg.mode == SourceMode::Markdown;
    let mut seen: HashSet<String> = HashSet::new();

    let mut sections: Vec<Section> = Vec::with_capacity(cfg.sections_per_doc);
    let mut prev: Option<Vec<u32>> = None;
    for _ in 0..cfg.sections_per_doc {
        let path = next_path(rng, prev.as_ref());
        let number = crate::model::render_number(&path)?;
        let head = heading(rng);
        let unnumbered = markdown && rng.random_bool(cfg.unnumbered_heading_rate);
        let line = match (markdown, unnumbered) {
            (true, true) => format!("{} {head}", "#".repeat(path.len())),
            (true, false) => format!("{} {number} {head}", "#".repeat(path.len())),
            (false, _) => format!("{number} {head}"),
        };
        let title = SectionTitle {
            raw_label: if unnumbered { String::new() } else { number },
            canonical_path: path.clone(),
            heading: head,
            synthesized: unnumbered,
        };

        let mut texts = Vec::with_capacity(cfg.texts_per_section);
        for _ in 0..cfg.texts_per_section {
            if rng.random_bool(cfg.no_requirement_rate) {
                let phrase = *NO_REQUIREMENT.choose(rng).expect("non-empty");
                texts.push((phrase.to_string(), ClassLabel::Info));
                continue;
            }
            let label = text_label(rng);
            let title_like = markdown && rng.random_bool(cfg.title_noise_rate);
            let text = loop {
                let body = sentence(rng, label, cfg.class_vocab_separation);
                let candidate = if title_like {
                    let a = rng.random_range(1..=9);
                    let b = rng.random_range(1..=9);
                    format!("{a}.{b} {body}")
                } else {
                    body
                };
                if seen.insert(normalize_text(&candidate)) {
                    break candidate;
                }
            };
            texts.push((text, label));
        }
        prev = Some(path);
        sections.push(Section { title, line, texts });
    }

    // Body lines in order, then spread over pages.
    let body: Vec<String> = sections
        .iter()
        .flat_map(|s| std::iter::once(s.line.clone()).chain(s.texts.iter().map(|(t, _)| t.clone())))
        .collect();
    let pages_n = cfg.pages_per_doc;
    let base = body.len() / pages_n;
    let extra = body.len() % pages_n;

    let company = *COMPANIES.choose(rng).expect("non-empty");
    let code = rng.random_range(100..1000);
    let (major, minor) = (rng.random_range(1..10), rng.random_range(0..10));
    let year = rng.random_range(2015..2025);
    let top_pool = [
        format!("DOC-{code} Requirement Specification"),
        format!("Version {major}.{minor} Confidential"),
        format!("{company} Internal Use Only"),
    ];
    let bottom_pool = [
        "Page {p} of {n}".to_string(),
        format!("Copyright {company} {year}"),
        format!("Printed copies are uncontrolled, revision {major}{minor}"),
    ];
    let n_top = cfg.hf_lines_per_page.div_ceil(2);
    let n_bottom = cfg.hf_lines_per_page / 2;

    let mut pages: Vec<Vec<String>> = Vec::with_capacity(pages_n);
    let mut hf_flags: Vec<bool> = Vec::new();
    let mut cursor = 0;
    for p in 0..pages_n {
        let take = base + usize::from(p < extra);
        let mut lines = Vec::new();
        let fill = |t: &str| t.replace("{p}", &(p + 1).to_string()).replace("{n}", &pages_n.to_string());
        for t in top_pool.iter().take(n_top) {
            if !rng.random_bool(cfg.hf_dropout) {
                lines.push(fill(t));
                hf_flags.push(true);
            }
        }
        for line in &body[cursor..cursor + take] {
            lines.push(line.clone());
            hf_flags.push(false);
        }
        cursor += take;
        for t in bottom_pool.iter().take(n_bottom) {
            if !rng.random_bool(cfg.hf_dropout) {
                lines.push(fill(t));
                hf_flags.push(true);
            }
        }
        pages.push(lines);
    }

    let doc = PagedDocument {
        doc_id: doc_id.to_string(),
        pages,
        source_mode: cfg.mode,
    };
    let units = to_units(&doc);
    debug_assert_eq!(units.len(), hf_flags.len());
    let removed_units = units
        .iter()
        .zip(&hf_flags)
        .filter(|(_, &hf)| hf)
        .map(|(u, _)| u.clone())
        .collect();
    let hf_labels = hf_flags
        .iter()
        .map(|&hf| if hf { HfLabel::HeaderFooter } else { HfLabel::ReqText })
        .collect();

    let mut row_labels = Vec::new();
    let mut tuples = Vec::with_capacity(sections.len());
    for s in sections {
        row_labels.push(ClassLabel::Header);
        row_labels.extend(s.texts.iter().map(|(_, l)| *l));
        tuples.push(SectionTuple {
            title: s.title,
            texts: s.texts.into_iter().map(|(t, _)| t).collect(),
        });
    }

    Ok(GeneratedDoc {
        doc,
        truth: DocTruth {
            doc_id: doc_id.to_string(),
            hf_labels,
            row_labels,
            extraction: ExtractionResult {
                doc_id: doc_id.to_string(),
                tuples,
                removed_units,
            },
        },
    })
}

/// Deterministic for a given seed and config.
pub fn generate_corpus(seed: u64, config: &GenConfig) -> Result<Corpus> {
    config.validate()?;
    let documents = (0..config.docs)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            generate_doc(&mut rng, &format!("SYN{seed}-{:03}", i + 1), config)
        })
        .collect::<Result<_>>()?;
    Ok(Corpus {
        seed,
        config: config.clone(),
        documents,
    })
}

/// `(features, label)` for every unit of every document, features computed per document.
pub fn hf_samples(corpus: &Corpus) -> Result<Vec<(HfFeatures, HfLabel)>> {
    let mut out = Vec::new();
    for d in &corpus.documents {
        let units = to_units(&d.doc);
        let feats = compute_features(&units)?;
        out.extend(feats.into_iter().zip(d.truth.hf_labels.iter().copied()));
    }
    Ok(out)
}

/// Standalone labeled rows: HEADER rows are titles, the rest texts.
pub fn generate_labeled_rows(seed: u64, n: usize, separation: f64) -> Result<Vec<LabeledText>> {
    if !(0.0..=1.0).contains(&separation) {
        return Err(Error::invalid("separation must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let label = if x < 0.20 {
                ClassLabel::Header
            } else if x < 0.45 {
                ClassLabel::Info
            } else if x < 0.80 {
                ClassLabel::FuncReq
            } else {
                ClassLabel::NonFuncReq
            };
            if label == ClassLabel::Header {
                LabeledText {
                    text: heading(&mut rng),
                    kind: RowKind::Title,
                    label,
                }
            } else {
                LabeledText {
                    text: sentence(&mut rng, label, separation),
                    kind: RowKind::Text,
                    label,
                }
            }
        })
        .collect())
}
