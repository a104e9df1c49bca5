//! Turns semi-structured requirement documents into numbered, typed rows.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`] splits markdown or form-feed paged text into [`TextUnit`]s.
//! 2. [`hf`] drops page furniture (headers and footers) with a two-feature
//!    random forest over repetition frequency and in-page position.
//! 3. [`section`] finds section titles, groups the text under them and
//!    renders the numbered [`RequirementRow`] table.
//! 4. [`classify`] labels every row as one of the four [`ClassLabel`]s.
//! 5. [`export`] writes the table as CSV, JSON or YAML.
//!
//! [`store`] keeps documents on disk with an append-only audit log for the
//! review workflow, and [`evalkit`] holds metrics plus a synthetic corpus
//! generator with ground truth.

pub mod classify;
pub mod error;
pub mod evalkit;
pub mod export;
pub mod hf;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod section;
pub mod store;

pub use error::{Error, Result};
pub use model::{
    ClassLabel, ExtractionResult, FinalOutput, RequirementRow, ReviewState, RowKind, SectionTitle,
    SectionTuple, SourceMode, TextUnit,
};
