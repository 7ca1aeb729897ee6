use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Label;
use crate::scalar::Scalar;

/// One operating point: everything scoring at or above `threshold` is
/// called positive. The first point has no threshold (nothing positive).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize), EvalError> {
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn check_finite<T: Scalar>(scores: &[T]) -> Result<(), EvalError> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(EvalError::NonFinite { index: i }),
        None => Ok(()),
    }
}

/// ROC polyline from (0, 0) to (1, 1), one vertex per distinct score.
pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Vec<RocPoint>, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: Some(s.to_f64_lossy()),
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Area under the ROC curve as the Mann-Whitney concordance, with ties
/// counted as one half. Computed from average ranks.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum = T::zero();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let avg = T::of_usize(i + j + 2) * T::half();
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum = rank_sum + avg;
            }
        }
        i = j + 1;
    }
    let p = T::of_usize(pos);
    let u = rank_sum - p * (p + T::one()) * T::half();
    Ok(u / (p * T::of_usize(neg)))
}

/// Area under the ROC polyline by the trapezoid rule.
pub fn roc_auc_trapezoid<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64, EvalError> {
    let pts = roc_curve(scores, labels)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum())
}

/// Largest TPR over operating points whose FPR does not exceed
/// `fpr_target`. No interpolation between points.
pub fn tpr_at_fpr<T: Scalar>(scores: &[T], labels: &[bool], fpr_target: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(EvalError::Invalid(format!("fpr target {fpr_target} outside [0, 1]")));
    }
    let pts = roc_curve(scores, labels)?;
    Ok(pts
        .iter()
        .filter(|p| p.fpr <= fpr_target)
        .map(|p| p.tpr)
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroF1 {
    pub value: f64,
    pub per_class: [f64; 3],
    /// Classes absent from both predictions and labels (scored as 0).
    pub absent: Vec<Label>,
}

pub fn macro_f1(predictions: &[Label], labels: &[Label]) -> Result<MacroF1, EvalError> {
    check_lengths(predictions.len(), labels.len())?;
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut per_class = [0.0; 3];
    let mut absent = Vec::new();
    for c in Label::ALL {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p == c, l == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            absent.push(c);
        } else {
            per_class[c.index()] = 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(MacroF1 {
        value: per_class.iter().sum::<f64>() / 3.0,
        per_class,
        absent,
    })
}

pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64, EvalError> {
    check_lengths(predictions.len(), labels.len())?;
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
    /// Each row normalized by its true-class count, in percent. Rows of
    /// absent classes are zero.
    pub row_percent: [[f64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion_matrix(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(predictions.len(), labels.len())?;
    let mut counts = [[0usize; 3]; 3];
    for (&p, &l) in predictions.iter().zip(labels) {
        counts[l.index()][p.index()] += 1;
    }
    let mut row_percent = [[0.0; 3]; 3];
    for (row, pct) in counts.iter().zip(row_percent.iter_mut()) {
        let n: usize = row.iter().sum();
        if n > 0 {
            for (c, p) in row.iter().zip(pct.iter_mut()) {
                *p = 100.0 * *c as f64 / n as f64;
            }
        }
    }
    Ok(ConfusionMatrix { counts, row_percent })
}
