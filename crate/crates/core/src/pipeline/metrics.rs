//! Classification metrics from a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `K × K` counts; row = true class, column = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("confusion matrix rows must all have K entries"));
        }
        Ok(Self {
            classes: k,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::invalid(format!(
                    "label pair ({t}, {p}) out of range for {classes} classes"
                )));
            }
            m.counts[t * classes + p] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// One-vs-rest `(TP, FP, FN, TN)` of class `k`.
    pub fn one_vs_rest(&self, k: usize) -> (u64, u64, u64, u64) {
        let tp = self.get(k, k);
        let fp = self.column_sum(k) - tp;
        let fn_ = self.row_sum(k) - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let n = self.total();
        if n == 0 {
            return Err(Error::invalid("metrics need at least one sample"));
        }
        let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        let mut precision_sum = 0.0;
        for k in 0..self.classes {
            let (a, b, c, d) = self.one_vs_rest(k);
            tp += a;
            fp += b;
            fn_ += c;
            tn += d;
            if a + b > 0 {
                precision_sum += a as f64 / (a + b) as f64;
            }
        }
        let trace: u64 = (0..self.classes).map(|k| self.get(k, k)).sum();
        Ok(Metrics {
            accuracy: (tp + tn) as f64 / (tp + tn + fp + fn_) as f64,
            top1: trace as f64 / n as f64,
            precision: precision_sum / self.classes as f64,
            f1: (2 * tp) as f64 / (2 * tp + fp + fn_) as f64,
        })
    }
}

/// Summary scores of a confusion matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// One-vs-rest accuracy pooled over classes: `Σ(TP+TN) / Σ(TP+TN+FP+FN)`.
    pub accuracy: f64,
    /// Fraction of samples whose predicted class is the true class.
    pub top1: f64,
    /// Macro-averaged precision; a class never predicted contributes 0.
    pub precision: f64,
    /// Micro F1: `2ΣTP / (2ΣTP + ΣFP + ΣFN)`.
    pub f1: f64,
}
