//! Multinomial naive Bayes over preprocessed tokens, with a structural prior
//! that favours HEADER for title rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::preprocess::TokenSeq;
use crate::error::{Error, Result};
use crate::model::{ClassLabel, RowKind};

pub const DEFAULT_TITLE_HEADER_WEIGHT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub vocabulary: BTreeMap<String, usize>,
    /// `log P(token | class)` with add-one smoothing, indexed by
    /// [`ClassLabel::index`] and then by vocabulary index.
    pub log_likelihood: [Vec<f64>; 4],
    pub priors: [f64; 4],
    /// HEADER posterior multiplier applied to TITLE rows.
    pub title_header_weight: f64,
}

impl BaselineModel {
    pub fn train(rows: &[(TokenSeq, RowKind, ClassLabel)]) -> Result<Self> {
        let mut class_rows = [0usize; 4];
        for (_, _, label) in rows {
            class_rows[label.index()] += 1;
        }
        if let Some(missing) = ClassLabel::ALL.into_iter().find(|l| class_rows[l.index()] == 0) {
            return Err(Error::invalid(format!("training data has no {missing} rows")));
        }

        let mut vocabulary = BTreeMap::new();
        for (tokens, _, _) in rows {
            for t in tokens.iter() {
                if !vocabulary.contains_key(t) {
                    vocabulary.insert(t.to_string(), 0);
                }
            }
        }
        for (i, slot) in vocabulary.values_mut().enumerate() {
            *slot = i;
        }
        let v = vocabulary.len();

        let mut counts = [vec![0u64; v], vec![0u64; v], vec![0u64; v], vec![0u64; v]];
        let mut totals = [0u64; 4];
        for (tokens, _, label) in rows {
            let c = label.index();
            for t in tokens.iter() {
                counts[c][vocabulary[t]] += 1;
                totals[c] += 1;
            }
        }

        let log_likelihood = std::array::from_fn(|c| {
            let denom = (totals[c] + v as u64) as f64;
            counts[c].iter().map(|&n| ((n + 1) as f64 / denom).ln()).collect()
        });
        let n = rows.len() as f64;
        let priors = std::array::from_fn(|c| class_rows[c] as f64 / n);

        Ok(BaselineModel {
            vocabulary,
            log_likelihood,
            priors,
            title_header_weight: DEFAULT_TITLE_HEADER_WEIGHT,
        })
    }

    /// Normalized class posterior; tokens outside the vocabulary are ignored.
    pub fn posterior(&self, tokens: &TokenSeq, kind: RowKind) -> [f64; 4] {
        let mut scores: [f64; 4] = std::array::from_fn(|c| self.priors[c].ln());
        for t in tokens.iter() {
            if let Some(&i) = self.vocabulary.get(t) {
                for (c, score) in scores.iter_mut().enumerate() {
                    *score += self.log_likelihood[c][i];
                }
            }
        }
        if kind == RowKind::Title {
            scores[ClassLabel::Header.index()] += self.title_header_weight.ln();
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: [f64; 4] = std::array::from_fn(|c| (scores[c] - max).exp());
        let z: f64 = exp.iter().sum();
        std::array::from_fn(|c| exp[c] / z)
    }

    /// Most probable label and its posterior. A TEXT row with no tokens left
    /// after preprocessing falls back to INFO at the INFO prior.
    pub fn predict(&self, tokens: &TokenSeq, kind: RowKind) -> (ClassLabel, f64) {
        if tokens.is_empty() && kind == RowKind::Text {
            return (ClassLabel::Info, self.priors[ClassLabel::Info.index()]);
        }
        let post = self.posterior(tokens, kind);
        let mut best = ClassLabel::Header;
        for label in ClassLabel::ALL {
            if post[label.index()] > post[best.index()] {
                best = label;
            }
        }
        (best, post[best.index()].clamp(0.0, 1.0))
    }
}
