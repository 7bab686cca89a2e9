//! Binary classification metrics.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Confusion counts. Rates that divide by zero are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Table counts whose accuracy is often misprinted as 84.46%.
const TABLE_COUNTS: (u64, u64, u64, u64) = (38, 46, 3, 250);

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Result<Self> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            tp,
            fp,
            tn,
            fn_,
            precision: ratio(tp, tp + fp),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
            accuracy: ratio(tp + tn, total),
        })
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn text(&self) -> String {
        let pct = |v: f64| {
            if v.is_nan() {
                "n/a".to_string()
            } else {
                format!("{:.2}%", 100.0 * v)
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "tp={} fp={} tn={} fn={}", self.tp, self.fp, self.tn, self.fn_);
        let _ = writeln!(out, "precision   {}", pct(self.precision));
        let _ = writeln!(out, "sensitivity {}", pct(self.sensitivity));
        let _ = writeln!(out, "specificity {}", pct(self.specificity));
        let _ = writeln!(out, "accuracy    {}", pct(self.accuracy));
        if (self.tp, self.fp, self.fn_, self.tn) == TABLE_COUNTS {
            let _ = writeln!(
                out,
                "note: these counts give accuracy {}; the widely quoted 84.46% does not follow from them",
                pct(self.accuracy)
            );
        }
        out
    }
}

/// Scores boolean predictions against ground truth.
pub fn compute_metrics(predictions: &[bool], ground_truth: &[bool]) -> Result<MetricsReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != ground_truth.len() {
        return Err(Error::DimensionMismatch {
            expected: ground_truth.len(),
            found: predictions.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in predictions.iter().zip(ground_truth) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    MetricsReport::from_counts(tp, fp, fn_, tn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts() {
        let m = MetricsReport::from_counts(38, 46, 3, 250).unwrap();
        assert!((m.precision - 0.4524).abs() < 5e-5);
        assert!((m.accuracy - 0.8546).abs() < 5e-5);
        assert!(m.text().contains("84.46%"));
    }

    #[test]
    fn perfect() {
        let truth = [true, false, true, false];
        let m = compute_metrics(&truth, &truth).unwrap();
        assert_eq!([m.precision, m.sensitivity, m.specificity, m.accuracy], [1.0; 4]);
    }

    #[test]
    fn all_negative() {
        let m = compute_metrics(&[false; 4], &[true, true, false, false]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert!(m.precision.is_nan());
        assert!(m.text().contains("precision   n/a"));
    }

    #[test]
    fn empty() {
        assert_eq!(compute_metrics(&[], &[]), Err(Error::EmptyInput));
    }
}
