//! Token-level confusion counts and accuracy / precision / recall / F1.
//!
//! The `O` label is the negative class. A token whose gold and predicted
//! labels are different non-`O` labels counts as both a false positive and a
//! false negative.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabelId;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("gold has {gold} labels but prediction has {pred}")]
pub struct LengthMismatch {
    pub gold: usize,
    pub pred: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, gold: LabelId, pred: LabelId, outside: LabelId) {
        match (gold == outside, pred == outside) {
            (true, true) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) if gold == pred => self.tp += 1,
            (false, false) => {
                self.fp += 1;
                self.fn_ += 1;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

pub fn confusion_counts(
    gold: &[LabelId],
    pred: &[LabelId],
    outside: LabelId,
) -> Result<ConfusionCounts, LengthMismatch> {
    if gold.len() != pred.len() {
        return Err(LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&g, &p) in gold.iter().zip(pred) {
        counts.record(g, p, outside);
    }
    Ok(counts)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    ratio(c.tp + c.tn, c.total())
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy_pct: String,
    pub precision_pct: String,
    pub recall_pct: String,
    pub f1_pct: String,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tokens: u64,
    pub token_accuracy: f64,
}

impl Report {
    /// `exact` is the number of tokens whose predicted label equals gold.
    pub fn new(counts: ConfusionCounts, tokens: u64, exact: u64) -> Self {
        let a = accuracy(&counts);
        let p = precision(&counts);
        let r = recall(&counts);
        let f = f1(p, r);
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        Report {
            accuracy: a,
            precision: p,
            recall: r,
            f1: f,
            accuracy_pct: pct(a),
            precision_pct: pct(p),
            recall_pct: pct(r),
            f1_pct: pct(f),
            tp: counts.tp,
            tn: counts.tn,
            fp: counts.fp,
            fn_: counts.fn_,
            tokens,
            token_accuracy: ratio(exact, tokens),
        }
    }

    /// Scores aligned gold/predicted label sequences.
    pub fn from_sequences<'a, I>(pairs: I, outside: LabelId) -> Result<Self, LengthMismatch>
    where
        I: IntoIterator<Item = (&'a [LabelId], &'a [LabelId])>,
    {
        let mut counts = ConfusionCounts::default();
        let mut tokens = 0;
        let mut exact = 0;
        for (gold, pred) in pairs {
            counts += confusion_counts(gold, pred, outside)?;
            tokens += gold.len() as u64;
            exact += gold.iter().zip(pred).filter(|(g, p)| g == p).count() as u64;
        }
        Ok(Report::new(counts, tokens, exact))
    }

    pub fn counts(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp,
            tn: self.tn,
            fp: self.fp,
            fn_: self.fn_,
        }
    }

    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "accuracy={:.4}\nprecision={:.4}\nrecall={:.4}\nf1={:.4}\n\
             accuracy_pct={}\nprecision_pct={}\nrecall_pct={}\nf1_pct={}\n\
             tp={}\ntn={}\nfp={}\nfn={}\ntokens={}\ntoken_accuracy={:.4}\n",
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.accuracy_pct,
            self.precision_pct,
            self.recall_pct,
            self.f1_pct,
            self.tp,
            self.tn,
            self.fp,
            self.fn_,
            self.tokens,
            self.token_accuracy
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
