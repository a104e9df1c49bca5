use std::collections::HashSet;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

/// Version tag of the shipped stopword resource.
pub const STOPWORDS_VERSION: &str = "en-v1";

const STOPWORDS_RAW: &str = include_str!("../../resources/stopwords_en_v1.txt");

/// Negations and modal verbs that survive stopword removal.
pub const RETAINED: [&str; 19] = [
    "not", "no", "never", "shall", "should", "must", "may", "might", "will", "would", "can",
    "cannot", "could", "shouldn't", "mustn't", "won't", "can't", "don't", "doesn't",
];

static STOPWORDS: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| STOPWORDS_RAW.lines().map(str::trim).filter(|w| !w.is_empty()).collect());

pub fn stopwords() -> &'static HashSet<&'static str> {
    &STOPWORDS
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

/// Lowercases, strips punctuation and drops stopwords.
///
/// Underscores and apostrophes inside a token are kept (`data_store`,
/// `shouldn't`). Negations and modals in [`RETAINED`] are never dropped.
pub fn preprocess(text: &str) -> TokenSeq {
    let lowered = text.to_lowercase();
    let tokens = lowered
        .split_whitespace()
        .filter_map(|raw| {
            let cleaned: String = raw
                .chars()
                .map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c })
                .filter(|&c| (c.is_alphanumeric() || c == '_' || c == '\'') && !c.is_uppercase())
                .collect();
            let token = cleaned.trim_matches('\'');
            if token.is_empty() {
                return None;
            }
            if STOPWORDS.contains(token) && !RETAINED.contains(&token) {
                return None;
            }
            Some(token.to_string())
        })
        .collect();
    TokenSeq(tokens)
}
