//! Confusion counts, g-mean, accuracy and precision/recall.

use std::collections::BTreeMap;

use crate::crowd::Vote;
use crate::dataset::{Label, LabelSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Negative, Label::Positive) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// True-positive rate; `None` without positive examples.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// True-negative rate; `None` without negative examples.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        self.sensitivity()
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Geometric mean of sensitivity and specificity.
pub fn gmean(c: &Confusion) -> Result<f64> {
    let sens = c.sensitivity().ok_or(Error::UndefinedMetric("g-mean without positive examples"))?;
    let spec = c.specificity().ok_or(Error::UndefinedMetric("g-mean without negative examples"))?;
    Ok((sens * spec).sqrt())
}

/// Confusion of `pred` against `truth` over every item of `truth`.
pub fn confusion(pred: &LabelSet, truth: &LabelSet) -> Result<Confusion> {
    let mut c = Confusion::default();
    let mut missing = Vec::new();
    for (id, &actual) in &truth.labels {
        match pred.labels.get(id) {
            Some(&p) => c.record(p, actual),
            None => missing.push(id.clone()),
        }
    }
    if missing.is_empty() {
        Ok(c)
    } else {
        Err(Error::CoverageGap(missing))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifiedCorrect {
    pub classified: usize,
    pub correct: usize,
    /// Percentage of classified items that are correct; `None` if nothing was classified.
    pub percent: Option<f64>,
}

/// Counts items that received a majority and how many of those match `truth`.
/// Items absent from `truth` are ignored.
pub fn classified_correct(majorities: &BTreeMap<String, Vote>, truth: &LabelSet) -> ClassifiedCorrect {
    let mut classified = 0;
    let mut correct = 0;
    for (id, vote) in majorities {
        let (Some(label), Some(&actual)) = (vote.label(), truth.labels.get(id)) else {
            continue;
        };
        classified += 1;
        if label == actual {
            correct += 1;
        }
    }
    ClassifiedCorrect {
        classified,
        correct,
        percent: ratio(correct, classified).map(|r| 100.0 * r),
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
