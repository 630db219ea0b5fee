//! Classical learners and metrics used on top of the extracted features.

pub mod anova;
pub mod linear;
pub mod metrics;
pub mod platt;
pub mod scale;
pub mod smo;

pub use anova::{anova_f_scores, anova_f_scores_sparse, anova_f_select, anova_f_select_sparse};
pub use linear::{
    train_calibrated_linear, train_linear_svm, CalibratedLinear, LinearSvmConfig, LinearSvmModel,
};
pub use metrics::{average_precision, classification_metrics, ranked_average_precision, Metrics};
pub use platt::{platt_calibrate, Platt};
pub use scale::{fit_standardizer, Preprocessor, Standardizer};
pub use smo::{train_calibrated_rbf, train_rbf_svm, CalibratedRbf, RbfSvmConfig, RbfSvmModel};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

/// Internal folds used to produce out-of-fold scores for calibration.
pub const CALIBRATION_FOLDS: usize = 3;

/// Stratified fold index per row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut fold = vec![0; y.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % k.max(1);
        }
    }
    fold
}

/// Platt calibration on out-of-fold scores from internal cross-fitting.
///
/// `fit_and_score(train, test)` fits on the `train` rows and returns scores
/// for the `test` rows. When an internal split lacks a class the calibration
/// falls back to the smoothed training prior and every out-of-fold
/// probability equals it.
pub fn cross_fit_platt<F>(y: &[bool], seed: u64, mut fit_and_score: F) -> Result<(Platt, Vec<f64>)>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<f64>>,
{
    let folds = stratified_folds(y, CALIBRATION_FOLDS, seed);
    let mut oof = vec![0.0; y.len()];
    for k in 0..CALIBRATION_FOLDS {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != k).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == k).collect();
        let (p, n) = class_counts(&train.iter().map(|&i| y[i]).collect::<Vec<_>>());
        if p == 0 || n == 0 || test.is_empty() {
            log::warn!("calibration split lacks a class; using the training prior");
            let prior = Platt::prior(y);
            return Ok((prior, vec![prior.prob(0.0); y.len()]));
        }
        for (i, s) in test.iter().zip(fit_and_score(&train, &test)?) {
            oof[*i] = s;
        }
    }
    let platt = platt_calibrate(&oof, y);
    let probs = oof.iter().map(|&s| platt.prob(s)).collect();
    Ok((platt, probs))
}

pub(crate) fn take_rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

/// Per-sample box bounds for "balanced" class weighting:
/// `C_i = C * n / (2 * n_{y_i})`.
pub fn balanced_costs(y: &[bool], c: f64) -> Result<Vec<f64>> {
    let (pos, neg) = class_counts(y);
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    let n = y.len() as f64;
    let cp = c * n / (2.0 * pos as f64);
    let cn = c * n / (2.0 * neg as f64);
    Ok(y.iter().map(|&l| if l { cp } else { cn }).collect())
}

pub fn class_counts(y: &[bool]) -> (usize, usize) {
    let pos = y.iter().filter(|&&l| l).count();
    (pos, y.len() - pos)
}

pub(crate) fn check_rows(x: &[Vec<f64>], y_len: usize) -> Result<usize> {
    if x.len() != y_len {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            x.len(),
            y_len
        )));
    }
    let d = x.first().map_or(0, Vec::len);
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension("ragged feature matrix".into()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
    }
    Ok(d)
}

pub(crate) fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}
