//! Positive-class precision/recall/F1 and rank-accumulated average precision.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when there are no actual positives.
    pub ap: Option<f64>,
}

/// AP over relevance flags already in rank order:
/// `Σ_k (R_k − R_{k−1}) · P_k` with recall measured against `n_relevant`.
/// `None` when `n_relevant` is zero.
pub fn ranked_average_precision(ranked_relevant: &[bool], n_relevant: usize) -> Option<f64> {
    if n_relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in ranked_relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / n_relevant as f64)
}

/// Ranking order: descending score, equal scores by ascending input index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// AP of `scores` against binary `labels`; `None` without positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let ranked: Vec<bool> = rank_order(scores).into_iter().map(|i| labels[i]).collect();
    ranked_average_precision(&ranked, n_pos)
}

/// Precision, recall and F1 on the positive class from hard predictions, and AP
/// from the continuous scores. Zero predicted positives give precision 0.
pub fn classification_metrics(scores: &[f64], preds: &[bool], labels: &[bool]) -> Metrics {
    let tp = preds.iter().zip(labels).filter(|(&p, &l)| p && l).count() as f64;
    let pred_pos = preds.iter().filter(|&&p| p).count() as f64;
    let actual_pos = labels.iter().filter(|&&l| l).count() as f64;
    let precision = if pred_pos > 0.0 { tp / pred_pos } else { 0.0 };
    let recall = if actual_pos > 0.0 {
        tp / actual_pos
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        precision,
        recall,
        f1,
        ap: average_precision(scores, labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, false, true]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_ranking_and_prediction() {
        let m =
            classification_metrics(&[0.9, 0.8, 0.2], &[true, true, false], &[true, true, false]);
        assert_eq!(
            (m.precision, m.recall, m.f1, m.ap),
            (1.0, 1.0, 1.0, Some(1.0))
        );
    }

    #[test]
    fn all_positive_predictor_closed_form() {
        let labels = [true, false, false, false, true, false, false, false];
        let p = 0.25;
        let m = classification_metrics(&[1.0; 8], &[true; 8], &labels);
        assert_eq!(m.recall, 1.0);
        assert!((m.precision - p).abs() < 1e-15);
        assert!((m.f1 - 2.0 * p / (1.0 + p)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cases() {
        let m = classification_metrics(&[0.1, 0.2], &[false, false], &[true, false]);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(classification_metrics(&[0.1], &[true], &[false])
            .ap
            .is_none());
    }

    #[test]
    fn ties_keep_input_order() {
        // equal scores: the first-listed item ranks first
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]), Some(1.0));
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]), Some(0.5));
    }
}
