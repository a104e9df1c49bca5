//! Evaluation metrics and a synthetic corpus with ground truth.

mod generator;

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, RequirementRow, RowKind};

pub use generator::{
    generate_corpus, generate_labeled_rows, hf_samples, Corpus, DocTruth, GenConfig, GeneratedDoc,
    LabeledText,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1, with every 0/0 defined as 0.
pub fn prf1(tp: u64, fp: u64, fn_: u64) -> Prf1 {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf1 {
        precision,
        recall,
        f1,
    }
}

/// Unweighted mean of per-class F1; 0 for no classes.
pub fn macro_f1(per_class: &[Counts]) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.iter().map(|c| prf1(c.tp, c.fp, c.fn_).f1).sum::<f64>() / per_class.len() as f64
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two paired values"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean of 0–5 Likert scores.
pub fn likert_average(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("no scores to average"));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=5.0).contains(*s)) {
        return Err(Error::invalid(format!("score {bad} outside the 0-5 scale")));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Fraction of positions where prediction and truth agree.
pub fn accuracy<T: PartialEq>(pred: &[T], truth: &[T]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", pred.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::invalid("nothing to score"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// One-vs-rest counts for `positive`.
pub fn binary_counts<T: PartialEq>(pred: &[T], truth: &[T], positive: &T) -> Counts {
    let mut c = Counts::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Per-class counts for the four requirement labels, in [`ClassLabel::ALL`] order.
pub fn class_counts(pred: &[ClassLabel], truth: &[ClassLabel]) -> [Counts; 4] {
    ClassLabel::ALL.map(|l| binary_counts(pred, truth, &l))
}

pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

type RowKey<'a> = (&'a str, RowKind, &'a str, &'a str);

fn row_key(r: &RequirementRow) -> RowKey<'_> {
    (&r.object_number, r.kind, &r.object_heading, &r.object_text)
}

/// Row-level extraction accuracy: rows matching on number, kind, heading and
/// text (as multisets), over the larger of the two row counts.
pub fn row_accuracy(pred: &[RequirementRow], truth: &[RequirementRow]) -> f64 {
    let denom = pred.len().max(truth.len());
    if denom == 0 {
        return 1.0;
    }
    let mut pool: HashMap<RowKey<'_>, usize> = HashMap::new();
    for r in truth {
        *pool.entry(row_key(r)).or_default() += 1;
    }
    let mut hits = 0;
    for r in pred {
        if let Some(n) = pool.get_mut(&row_key(r)) {
            if *n > 0 {
                *n -= 1;
                hits += 1;
            }
        }
    }
    hits as f64 / denom as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Truth rows carrying this label among the scored pairs.
    pub support: u64,
}

/// Extraction and classification quality of predicted rows against truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub truth_rows: usize,
    pub pred_rows: usize,
    pub row_accuracy: f64,
    /// Predicted rows paired with a truth row by number, kind, heading and text.
    pub matched_rows: usize,
    /// Matched pairs where both sides carry a label.
    pub scored_rows: usize,
    pub class_accuracy: Option<f64>,
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    pub macro_f1: Option<f64>,
}

/// Scores labels over rows that match between prediction and truth, using
/// each row's effective (human-corrected if present) label.
pub fn evaluate_rows(pred: &[RequirementRow], truth: &[RequirementRow]) -> EvalReport {
    let mut pool: HashMap<RowKey<'_>, VecDeque<&RequirementRow>> = HashMap::new();
    for r in truth {
        pool.entry(row_key(r)).or_default().push_back(r);
    }
    let mut matched = 0;
    let mut pairs = Vec::new();
    for p in pred {
        if let Some(t) = pool.get_mut(&row_key(p)).and_then(VecDeque::pop_front) {
            matched += 1;
            if let (Some(pl), Some(tl)) = (p.effective_type(), t.effective_type()) {
                pairs.push((pl, tl));
            }
        }
    }
    let (pl, tl): (Vec<ClassLabel>, Vec<ClassLabel>) = pairs.into_iter().unzip();
    let counts = class_counts(&pl, &tl);
    let per_class = ClassLabel::ALL
        .iter()
        .zip(counts)
        .map(|(&label, c)| {
            let m = prf1(c.tp, c.fp, c.fn_);
            let metrics = ClassMetrics {
                counts: c,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: c.tp + c.fn_,
            };
            (label, metrics)
        })
        .collect();
    EvalReport {
        truth_rows: truth.len(),
        pred_rows: pred.len(),
        row_accuracy: row_accuracy(pred, truth),
        matched_rows: matched,
        scored_rows: tl.len(),
        class_accuracy: accuracy(&pl, &tl).ok(),
        per_class,
        macro_f1: (!tl.is_empty()).then(|| macro_f1(&counts)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prf1_examples() {
        // 226 + 57 = 283 header/footer test units.
        let m = prf1(226, 22, 57);
        assert!(close(m.precision, 226.0 / 248.0, 1e-12));
        assert!(close(m.recall, 226.0 / 283.0, 1e-12));
        assert!(close(m.precision, 0.911, 5e-3) && close(m.recall, 0.799, 5e-3) && close(m.f1, 0.851, 5e-3));
        assert_eq!((round3(m.precision), round3(m.recall), round3(m.f1)), (0.911, 0.799, 0.851));

        let m = prf1(10, 0, 0);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let m = prf1(0, 0, 5);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn macro_f1_examples() {
        let perfect = Counts { tp: 5, fp: 0, fn_: 0 };
        let zero = Counts { tp: 0, fp: 3, fn_: 2 };
        assert_eq!(macro_f1(&[perfect, zero]), 0.5);
        let single = Counts { tp: 3, fp: 1, fn_: 2 };
        assert_eq!(macro_f1(&[single]), prf1(3, 1, 2).f1);

        // Hand computation:
        //   A: tp 8 fp 2 fn 0 -> p .8   r 1    f1 .888889
        //   B: tp 5 fp 5 fn 5 -> p .5   r .5   f1 .5
        //   C: tp 9 fp 1 fn 3 -> p .9   r .75  f1 .818182
        //   D: tp 0 fp 0 fn 4 -> f1 0
        //   mean = 2.207071 / 4 = 0.551768
        let four = [
            Counts { tp: 8, fp: 2, fn_: 0 },
            Counts { tp: 5, fp: 5, fn_: 5 },
            Counts { tp: 9, fp: 1, fn_: 3 },
            Counts { tp: 0, fp: 0, fn_: 4 },
        ];
        assert!(close(macro_f1(&four), 0.551768, 1e-6));
    }

    #[test]
    fn pearson_examples() {
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0, 1e-15));
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap(), -1.0, 1e-15));
        // xs mean 2.5, ys mean 3.75; dx = [-1.5,-.5,.5,1.5], dy = [-1.75,.25,1.25,.25]
        // sxy = 2.625 - .125 + .625 + .375 = 3.5; sxx = 5; syy = 3.0625+.0625+1.5625+.0625 = 4.75
        // r = 3.5 / sqrt(23.75) = 0.718185...
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 5.0, 4.0]).unwrap();
        assert!(close(r, 3.5 / 23.75f64.sqrt(), 1e-12));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn likert_examples() {
        let e1 = [4.38, 4.33, 4.44, 4.49, 4.56];
        assert!(close(likert_average(&e1).unwrap(), 4.44, 5e-3));
        assert_eq!(likert_average(&[5.0, 5.0, 5.0]).unwrap(), 5.0);
        assert!(likert_average(&[]).is_err());
        assert!(likert_average(&[5.5]).is_err());
    }

    #[test]
    fn row_accuracy_counts_multisets() {
        let a = RequirementRow::title("x-R00001".into(), &[1], "A").unwrap();
        let b = RequirementRow::text("x-R00002".into(), &[1, 1], "t").unwrap();
        let c = RequirementRow::text("x-R00003".into(), &[1, 2], "u").unwrap();
        assert_eq!(row_accuracy(&[a.clone(), b.clone(), c.clone()], &[a.clone(), b.clone(), c.clone()]), 1.0);
        assert!(close(row_accuracy(&[a.clone(), b.clone()], &[a.clone(), b.clone(), c]), 2.0 / 3.0, 1e-12));
        assert!(close(row_accuracy(&[a.clone(), a.clone()], &[a, b]), 0.5, 1e-12));
    }

    #[test]
    fn evaluate_rows_pairs_by_content() {
        let mut truth = vec![
            RequirementRow::title("t-R00001".into(), &[1], "Scope").unwrap(),
            RequirementRow::text("t-R00002".into(), &[1, 1], "The unit shall stop.").unwrap(),
            RequirementRow::text("t-R00003".into(), &[1, 2], "Latency below 5 ms.").unwrap(),
        ];
        for (r, l) in truth.iter_mut().zip([ClassLabel::Header, ClassLabel::FuncReq, ClassLabel::NonFuncReq]) {
            r.object_type = Some(l);
        }
        let mut pred: Vec<_> = truth.iter().rev().cloned().collect();
        for r in &mut pred {
            r.object_identifier = format!("p{}", r.object_identifier);
        }
        pred[0].object_type = Some(ClassLabel::FuncReq);
        let report = evaluate_rows(&pred, &truth);
        assert_eq!((report.matched_rows, report.scored_rows), (3, 3));
        assert!(close(report.class_accuracy.unwrap(), 2.0 / 3.0, 1e-12));
        let func = &report.per_class[&ClassLabel::FuncReq];
        assert_eq!(func.counts, Counts { tp: 1, fp: 1, fn_: 0 });
        // HEADER 1, FUNC 2/3, NFR 0, INFO 0.
        assert!(close(report.macro_f1.unwrap(), (1.0 + 2.0 / 3.0) / 4.0, 1e-12));

        let unlabeled = evaluate_rows(&[], &truth);
        assert_eq!((unlabeled.row_accuracy, unlabeled.macro_f1), (0.0, None));
    }

    proptest! {
        #[test]
        fn prf1_bounds(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
            let m = prf1(tp, fp, fn_);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-15);
            prop_assert_eq!(m.f1 == 0.0, tp == 0);
        }

        #[test]
        fn pearson_affine_invariant(
            xs in proptest::collection::vec(-10.0f64..10.0, 3..40),
            noise in proptest::collection::vec(-5.0f64..5.0, 40),
            a in 0.1f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, n)| 0.5 * x + n).collect();
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assume!(xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() > 1.0);
            let my = ys.iter().sum::<f64>() / ys.len() as f64;
            prop_assume!(ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() > 1.0);
            let base = pearson(&xs, &ys).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            prop_assert!((pearson(&scaled, &ys).unwrap() - base).abs() <= 1e-12);
            let scaled_y: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
            prop_assert!((pearson(&xs, &scaled_y).unwrap() - base).abs() <= 1e-12);
        }
    }
}
