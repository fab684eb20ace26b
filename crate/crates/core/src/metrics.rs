//! Selection and prediction metrics.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{invalid, mismatch, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    /// `|selected \ support| / |selected|`, 0 when nothing was selected.
    pub false_positive_rate: f64,
    /// `|selected ∩ support|`.
    pub correct_count: usize,
}

pub fn selection_metrics(selected: &[usize], true_support: &[usize]) -> SelectionMetrics {
    let selected: BTreeSet<usize> = selected.iter().copied().collect();
    let support: BTreeSet<usize> = true_support.iter().copied().collect();
    let tp = selected.intersection(&support).count();
    let fp = selected.len() - tp;
    SelectionMetrics {
        true_positives: tp,
        false_positives: fp,
        false_positive_rate: if selected.is_empty() { 0.0 } else { fp as f64 / selected.len() as f64 },
        correct_count: tp,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Mean absolute percentage error over observations with `y ≠ 0`; `None` if there are none.
    pub mape: Option<f64>,
}

pub fn regression_metrics(y: &[f64], yhat: &[f64]) -> Result<RegressionMetrics> {
    if y.len() != yhat.len() {
        return Err(mismatch(format!("{} targets vs {} predictions", y.len(), yhat.len())));
    }
    if y.is_empty() {
        return Err(invalid("metrics need at least one observation"));
    }
    let n = y.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut nonzero = 0usize;
    for (&t, &p) in y.iter().zip(yhat) {
        let e = t - p;
        sq += e * e;
        abs += e.abs();
        if t != 0.0 {
            pct += (e / t).abs();
            nonzero += 1;
        }
    }
    Ok(RegressionMetrics {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mape: (nonzero > 0).then(|| pct / nonzero as f64),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// `None` when `y` contains a single class.
    pub auc: Option<f64>,
    pub f1: f64,
}

/// Area under the ROC curve via the rank statistic, ties counted half.
pub fn roc_auc(y: &[f64], scores: &[f64]) -> Option<f64> {
    let n_pos = y.iter().filter(|&&v| v == 1.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks (1-based) over tied groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&k| y[k] == 1.0).count() as f64 * midrank;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

pub fn classification_metrics(y: &[f64], p_hat: &[f64], threshold: f64) -> Result<ClassificationMetrics> {
    if y.len() != p_hat.len() {
        return Err(mismatch(format!("{} labels vs {} scores", y.len(), p_hat.len())));
    }
    if y.is_empty() {
        return Err(invalid("metrics need at least one observation"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(invalid("labels must be 0 or 1"));
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y.iter().zip(p_hat) {
        let pred = p > threshold;
        let actual = t == 1.0;
        match (pred, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if pred == actual {
            correct += 1;
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / y.len() as f64,
        auc: roc_auc(y, p_hat),
        f1,
    })
}
