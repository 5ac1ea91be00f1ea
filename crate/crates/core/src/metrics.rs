//! Headline metrics: AUROC for binary outcomes, macro-averaged AUROC for
//! multi-label outcomes, and linearly weighted Cohen's kappa for ordinal
//! multi-class outcomes.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::model::{HeadBank, TaskKind};

/// Area under the ROC curve via the Mann–Whitney statistic; tied scores
/// between a positive and a negative count one half.
///
/// Ranks are assigned after sorting, with tied runs sharing their mean rank,
/// so the cost is `O(n log n)`.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_dim(scores.len(), labels.len())?;
    if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::invalid(format!("label {bad} is not in {{0, 1}}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs at least one positive and one negative label".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based mid-ranks over positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count();
        rank_sum += mid_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroAuroc {
    pub value: f64,
    /// AUROC of each outcome column; `None` where the column has one class only.
    pub per_outcome: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

/// Unweighted mean of per-column AUROC. Columns with a single class present
/// are skipped and listed in [`MacroAuroc::skipped`].
pub fn macro_auroc(scores: ArrayView2<'_, f64>, labels: ArrayView2<'_, f64>) -> Result<MacroAuroc> {
    check_dim(scores.nrows(), labels.nrows())?;
    check_dim(scores.ncols(), labels.ncols())?;
    let mut per_outcome = Vec::with_capacity(scores.ncols());
    let mut skipped = Vec::new();
    for (j, (s, l)) in scores.columns().into_iter().zip(labels.columns()).enumerate() {
        match auroc(&s.to_vec(), &l.to_vec()) {
            Ok(v) => per_outcome.push(Some(v)),
            Err(Error::UndefinedMetric(_)) => {
                per_outcome.push(None);
                skipped.push(j);
            }
            Err(e) => return Err(e),
        }
    }
    let valid: Vec<f64> = per_outcome.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::UndefinedMetric(
            "no outcome column has both classes present".into(),
        ));
    }
    Ok(MacroAuroc {
        value: valid.iter().sum::<f64>() / valid.len() as f64,
        per_outcome,
        skipped,
    })
}

/// Cohen's kappa with linear disagreement weights `|i - j| / (C - 1)`:
/// `1 - Σ w∘O / Σ w∘E`, where `E` is the outer product of the two marginals
/// scaled to `n`.
pub fn linear_weighted_kappa(pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    check_dim(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("kappa needs at least one prediction"));
    }
    if classes < 2 {
        return Err(Error::invalid("kappa needs at least two classes"));
    }
    if let Some(bad) = pred.iter().chain(truth).find(|&&c| c >= classes) {
        return Err(Error::invalid(format!("class {bad} is out of range 0..{classes}")));
    }
    let scale = (classes - 1) as f64;
    let n = pred.len() as f64;

    let observed: f64 = pred.iter().zip(truth).map(|(&p, &t)| p.abs_diff(t) as f64).sum::<f64>() / scale;

    let mut pred_hist = vec![0usize; classes];
    let mut truth_hist = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        pred_hist[p] += 1;
        truth_hist[t] += 1;
    }
    let mut expected = 0.0;
    for (i, &hp) in pred_hist.iter().enumerate() {
        if hp == 0 {
            continue;
        }
        for (j, &ht) in truth_hist.iter().enumerate() {
            expected += i.abs_diff(j) as f64 * (hp * ht) as f64;
        }
    }
    expected /= scale * n;

    if expected == 0.0 {
        return Err(Error::UndefinedMetric(
            "kappa is undefined when chance disagreement is zero".into(),
        ));
    }
    Ok(1.0 - observed / expected)
}

/// Scores of one model on one dataset, under the task's headline metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub metric_name: String,
    pub headline: f64,
    /// Per-outcome AUROC, only for multi-label tasks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_outcome: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped_outcomes: Vec<usize>,
    pub n_eval: usize,
}

pub fn headline_metric_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Binary => "auroc",
        TaskKind::MultiClass(_) => "linear_weighted_kappa",
        TaskKind::MultiLabel(_) => "macro_auroc",
    }
}

/// Scores `bank` on `data` with the headline metric of the task.
pub fn evaluate(bank: &HeadBank, data: &Dataset) -> Result<MetricsReport> {
    if bank.task() != data.task() {
        return Err(Error::invalid(format!(
            "model is for a {} task, data is {}",
            bank.task(),
            data.task()
        )));
    }
    check_dim(data.n_features(), bank.dim())?;
    let task = data.task();
    let n = data.n_rows();
    let (headline, per_outcome, skipped) = match task {
        TaskKind::Binary => {
            let scores: Vec<f64> = (0..n)
                .map(|i| bank.predict(data.row(i)).map(|s| s[0]))
                .collect::<Result<_>>()?;
            (auroc(&scores, &data.head_targets(0))?, None, Vec::new())
        }
        TaskKind::MultiClass(c) => {
            let pred: Vec<usize> = (0..n).map(|i| bank.predict_class(data.row(i))).collect::<Result<_>>()?;
            let truth: Vec<usize> = data.labels().column(0).iter().map(|&v| v as usize).collect();
            (linear_weighted_kappa(&pred, &truth, c)?, None, Vec::new())
        }
        TaskKind::MultiLabel(k) => {
            let mut scores = ndarray::Array2::zeros((n, k));
            for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                row.assign(&ndarray::ArrayView1::from(&bank.predict(data.row(i))?));
            }
            let m = macro_auroc(scores.view(), data.labels())?;
            (m.value, Some(m.per_outcome), m.skipped)
        }
    };
    Ok(MetricsReport {
        task,
        metric_name: headline_metric_name(task).to_string(),
        headline,
        per_outcome,
        skipped_outcomes: skipped,
        n_eval: n,
    })
}
