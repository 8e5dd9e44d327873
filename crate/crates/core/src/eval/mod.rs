//! Evaluation: confusion counts at a threshold, AUROC (Mann–Whitney, ties
//! count one half), AUPR (average-precision step form), optimal-threshold
//! estimation on the validation split, and the full test-split report.
//!
//! Tie policy is fixed across the crate: a sample whose score equals the
//! threshold is predicted anomalous. Shrinkage-style models produce tied
//! scores routinely, so this cannot be left to chance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSplit;
use crate::models::{anomaly_scores, ModelError, ModelState};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scores and labels have different lengths: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-sample scores with binary labels (1 = anomaly).
#[derive(Debug, Clone)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self, EvalError> {
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalError::Undefined(format!(
                "non-finite score at sample {i}"
            )));
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn anomaly_ratio(&self) -> f64 {
        self.positives() as f64 / self.len() as f64
    }

    fn require_both_classes(&self, what: &str) -> Result<(), EvalError> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(EvalError::Undefined(format!(
                "{what} needs at least one positive and one negative sample"
            )));
        }
        Ok(())
    }
}

/// Confusion counts plus the derived thresholded metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// 0/0 counts as 0 throughout.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion at a threshold; `score >= thr` predicts anomaly.
pub fn confusion_at(ls: &LabeledScores, thr: f64) -> Confusion {
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&s, &l) in ls.scores().iter().zip(ls.labels()) {
        match (s >= thr, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Probability that a random anomaly outscores a random inlier, ties
/// counted one half (rank-sum formulation; identical to trapezoidal ROC
/// integration).
pub fn auroc(ls: &LabeledScores) -> Result<f64, EvalError> {
    ls.require_both_classes("auroc")?;
    let n = ls.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ls.scores()[a].partial_cmp(&ls.scores()[b]).unwrap());

    // average ranks over tie groups (1-based ranks)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ls.scores()[order[j]] == ls.scores()[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            if ls.labels()[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let pos = ls.positives() as f64;
    let neg = ls.negatives() as f64;
    let u = rank_sum_pos - pos * (pos + 1.0) / 2.0;
    Ok(u / (pos * neg))
}

/// Area under the precision-recall curve in the average-precision step
/// form: sum over descending unique thresholds of (R_i - R_{i-1}) * P_i.
pub fn aupr(ls: &LabeledScores) -> Result<f64, EvalError> {
    ls.require_both_classes("aupr")?;
    let n = ls.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ls.scores()[b].partial_cmp(&ls.scores()[a]).unwrap());

    let pos = ls.positives() as f64;
    let mut tp = 0usize;
    let mut predicted = 0usize;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ls.scores()[order[j]] == ls.scores()[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            if ls.labels()[idx] == 1 {
                tp += 1;
            }
            predicted += 1;
        }
        let recall = tp as f64 / pos;
        let precision = tp as f64 / predicted as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(area)
}

/// Linear-interpolation quantile of already-sorted values at percentile
/// `p` in [0, 100].
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * (p / 100.0).clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn best_f1_candidate(ls: &LabeledScores, candidates: &[f64]) -> (f64, f64) {
    let mut best_thr = f64::INFINITY;
    let mut best_f1 = -1.0;
    for &thr in candidates {
        let f1 = confusion_at(ls, thr).f1();
        // ties resolve to the smallest threshold, favoring recall
        if f1 > best_f1 || (f1 == best_f1 && thr < best_thr) {
            best_f1 = f1;
            best_thr = thr;
        }
    }
    (best_thr, best_f1)
}

/// Threshold maximizing validation F1 among score quantiles around the
/// normal fraction.
///
/// Candidates are quantiles at percentiles `p0 - delta ..= p0 + delta` in
/// steps of 0.1, where `p0 = 100 * (1 - anomaly_ratio)` and
/// `delta = min(p0, 100 - p0, 20)`. Ties resolve to the smallest
/// threshold.
pub fn optimal_threshold(val: &LabeledScores) -> Result<f64, EvalError> {
    val.require_both_classes("optimal_threshold")?;
    let mut sorted = val.scores().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let p0 = 100.0 * (1.0 - val.anomaly_ratio());
    let delta = p0.min(100.0 - p0).min(20.0);
    // integer stepping in tenths of a percentile avoids drift
    let steps = (delta * 10.0).round() as i64;
    let candidates: Vec<f64> = (-steps..=steps)
        .map(|k| quantile_sorted(&sorted, p0 + k as f64 / 10.0))
        .collect();
    Ok(best_f1_candidate(val, &candidates).0)
}

/// Audit-mode exhaustive search: every midpoint of consecutive distinct
/// scores plus both extremes. Same tie rule as [`optimal_threshold`].
pub fn optimal_threshold_exhaustive(val: &LabeledScores) -> Result<f64, EvalError> {
    val.require_both_classes("optimal_threshold")?;
    let mut sorted = val.scores().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(sorted[0] - 1.0);
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.extend_from_slice(&sorted);
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    Ok(best_f1_candidate(val, &candidates).0)
}

/// The full metric set of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Score the validation and test splits, choose the threshold on validation
/// only, and report thresholded + ranking metrics on the test split.
pub fn evaluate(model: &ModelState, data: &DataSplit) -> Result<MetricsReport, EvalError> {
    evaluate_with(model, data, false)
}

/// [`evaluate`] with the exhaustive threshold search enabled.
pub fn evaluate_with(
    model: &ModelState,
    data: &DataSplit,
    exhaustive_threshold: bool,
) -> Result<MetricsReport, EvalError> {
    let val_scores = anomaly_scores(model, &data.val.x)?;
    let val = LabeledScores::new(val_scores.into_vec(), data.val.y.clone())?;
    let threshold = if exhaustive_threshold {
        optimal_threshold_exhaustive(&val)?
    } else {
        optimal_threshold(&val)?
    };

    let test_scores = anomaly_scores(model, &data.test.x)?;
    let test = LabeledScores::new(test_scores.into_vec(), data.test.y.clone())?;
    let confusion = confusion_at(&test, threshold);
    Ok(MetricsReport {
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        auroc: auroc(&test)?,
        aupr: aupr(&test)?,
        threshold,
        tp: confusion.tp,
        fp: confusion.fp,
        tn: confusion.tn,
        fn_: confusion.fn_,
    })
}
