//! Data-blind baselines: predict positive with the training prior, or always.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::util::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Positive,
}

/// Scores and hard predictions for `n_test` items.
///
/// Random: Bernoulli(prior) predictions with independent uniform scores.
/// Positive: every prediction positive with constant score 1.
pub fn run_baseline(
    kind: BaselineKind,
    train_labels: &[bool],
    n_test: usize,
    seed: u64,
) -> (Vec<f64>, Vec<bool>) {
    match kind {
        BaselineKind::Positive => (vec![1.0; n_test], vec![true; n_test]),
        BaselineKind::Random => {
            let prior = if train_labels.is_empty() {
                0.0
            } else {
                train_labels.iter().filter(|&&l| l).count() as f64 / train_labels.len() as f64
            };
            let mut rng = rng_from_seed(seed);
            let mut scores = Vec::with_capacity(n_test);
            let mut preds = Vec::with_capacity(n_test);
            for _ in 0..n_test {
                preds.push(rng.random::<f64>() < prior);
                scores.push(rng.random::<f64>());
            }
            (scores, preds)
        }
    }
}
