//! Confusion-count metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-vs-rest scores for a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl ClassMetrics {
    fn from_counts(class: usize, tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            class,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Fraction of exact matches.
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl MetricsReport {
    /// Class 1 of a binary report.
    pub fn positive(&self) -> &ClassMetrics {
        &self.classes[1]
    }
}

pub fn evaluate(predictions: &[usize], truths: &[usize], n_classes: usize) -> Result<MetricsReport> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Empty("evaluation needs at least one sample"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Training(format!(
                "label outside 0..{n_classes} (predicted {p}, truth {t})"
            )));
        }
        confusion[t][p] += 1;
    }
    let n = truths.len();
    let classes: Vec<ClassMetrics> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_ = confusion[c].iter().sum::<usize>() - tp;
            let fp = (0..n_classes).map(|t| confusion[t][c]).sum::<usize>() - tp;
            ClassMetrics::from_counts(c, tp, fp, fn_, n - tp - fp - fn_)
        })
        .collect();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let macro_f1 = classes.iter().map(|c| c.f1).sum::<f64>() / n_classes as f64;
    Ok(MetricsReport {
        classes,
        confusion,
        accuracy: correct as f64 / n as f64,
        macro_f1,
    })
}

/// Binary evaluation; class 1 is the positive label.
pub fn evaluate_binary(predictions: &[bool], truths: &[bool]) -> Result<MetricsReport> {
    let p: Vec<usize> = predictions.iter().map(|&b| b as usize).collect();
    let t: Vec<usize> = truths.iter().map(|&b| b as usize).collect();
    evaluate(&p, &t, 2)
}

/// One line of the experiment table `label,feature,train_f1,test_f1`. A
/// missing train score (e.g. for the rule-based pre-annotator) prints `*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub feature: String,
    pub train_f1: Option<f64>,
    pub test_f1: Option<f64>,
}

pub const METRICS_HEADER: &str = "label,feature,train_f1,test_f1";

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "*".into());
        format!(
            "{},{},{},{}",
            self.label,
            self.feature,
            fmt(self.train_f1),
            fmt(self.test_f1)
        )
    }
}

pub fn write_metrics<W: Write>(mut out: W, rows: &[MetricsRow], header: bool) -> Result<()> {
    if header {
        writeln!(out, "{METRICS_HEADER}")?;
    }
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    out.flush()?;
    Ok(())
}
