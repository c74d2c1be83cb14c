use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ConfusionMatrix;

/// Micro-averaged scores of a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
}

/// Micro-averaged precision, recall and F-measure: per-class TP, FP and FN
/// are summed over classes before the ratios are taken. F is 0 when
/// precision and recall are both 0.
///
/// F is evaluated as `2 TP / (2 TP + FP + FN)`, the same quantity as
/// `2 P R / (P + R)` but computed as a single rounded division of counts.
pub fn f_measure(confusion: &ConfusionMatrix) -> Result<(f64, f64, f64)> {
    if confusion.total() == 0 {
        return Err(Error::Domain("F-measure of an empty confusion matrix".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for c in 0..confusion.classes() {
        let (t, p, n) = confusion.class_counts(c);
        tp += t;
        fp += p;
        fn_ += n;
    }
    let recall = tp as f64 / (tp + fn_) as f64;
    let precision = tp as f64 / (tp + fp) as f64;
    let f = if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok((precision, recall, f))
}

pub fn metrics(confusion: &ConfusionMatrix) -> Result<Metrics> {
    let (precision, recall, f_measure) = f_measure(confusion)?;
    Ok(Metrics {
        precision,
        recall,
        f_measure,
        accuracy: confusion.trace() as f64 / confusion.total() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal() {
        let m = ConfusionMatrix::from_rows(&[vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 7]]).unwrap();
        assert_eq!(f_measure(&m).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_example() {
        let m = ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap();
        let (p, r, f) = f_measure(&m).unwrap();
        assert_eq!((p, r, f), (0.7, 0.7, 0.7));
    }

    #[test]
    fn all_wrong_gives_zero() {
        let m = ConfusionMatrix::from_rows(&[vec![0, 3], vec![5, 0]]).unwrap();
        assert_eq!(f_measure(&m).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_is_domain_error() {
        assert!(matches!(f_measure(&ConfusionMatrix::new(3)), Err(Error::Domain(_))));
    }
}
