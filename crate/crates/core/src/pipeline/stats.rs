//! Fold-level statistics: t-based confidence intervals and the paired test
//! used to mark models not significantly worse than the best one.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::util::{mean, sample_sd};

/// Two-sided 97.5% Student-t quantile with `df` degrees of freedom.
pub fn t_critical(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Half-width of the 95% confidence interval of the mean of `values`.
pub fn ci_half_width(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let n = values.len() as f64;
    t_critical(values.len() - 1) * sample_sd(values) / n.sqrt()
}

/// Two-sided one-sample t-test of `H0: mean = 0` at α = 0.05.
///
/// Constant samples are decided directly: all zero is not significant, any
/// other constant is.
pub fn one_sample_significant(diffs: &[f64]) -> bool {
    if diffs.len() < 2 {
        return false;
    }
    let m = mean(diffs);
    let sd = sample_sd(diffs);
    if sd == 0.0 {
        return m != 0.0;
    }
    let t = m / (sd / (diffs.len() as f64).sqrt());
    t.abs() >= t_critical(diffs.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceRule {
    #[default]
    PairedT,
    CiOverlap,
}

/// For each model's per-fold values: is it not significantly worse than the
/// model with the highest mean? Entries with `None` are skipped (left false)
/// and never chosen as best. Returns (index of best, flags).
pub fn significance_marks(
    values: &[Option<&[f64]>],
    rule: SignificanceRule,
) -> Result<(Option<usize>, Vec<bool>)> {
    let present: Vec<(usize, &[f64])> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let Some(&(_, first)) = present.first() else {
        return Ok((None, vec![false; values.len()]));
    };
    if present.iter().any(|(_, v)| v.len() != first.len()) {
        return Err(Error::invalid("significance test needs equal fold counts"));
    }
    let mut best = present[0];
    for &(i, v) in &present[1..] {
        if mean(v) > mean(best.1) {
            best = (i, v);
        }
    }
    let mut flags = vec![false; values.len()];
    for &(i, v) in &present {
        flags[i] = match rule {
            SignificanceRule::PairedT => {
                let d: Vec<f64> = best.1.iter().zip(v).map(|(b, x)| b - x).collect();
                !one_sample_significant(&d)
            }
            SignificanceRule::CiOverlap => {
                let hb = ci_half_width(best.1);
                let hv = ci_half_width(v);
                mean(best.1) - hb <= mean(v) + hv
            }
        };
    }
    Ok((Some(best.0), flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_table_value_for_four_df() {
        assert!((t_critical(4) - 2.776).abs() < 1e-3);
    }

    #[test]
    fn self_comparison_is_flagged() {
        let a = [0.5, 0.6, 0.4, 0.55, 0.45];
        let (best, flags) =
            significance_marks(&[Some(&a), Some(&a)], SignificanceRule::PairedT).unwrap();
        assert_eq!(best, Some(0));
        assert_eq!(flags, vec![true, true]);
    }

    #[test]
    fn constant_difference_is_significant() {
        let a = [0.5, 0.6, 0.4, 0.55, 0.45];
        let b: Vec<f64> = a.iter().map(|x| x - 0.2).collect();
        let (_, flags) =
            significance_marks(&[Some(&a), Some(&b)], SignificanceRule::PairedT).unwrap();
        assert_eq!(flags, vec![true, false]);
    }

    #[test]
    fn small_noisy_differences_are_not_significant() {
        let d = [0.01, -0.02, 0.02, -0.01, 0.00];
        // t = 0 here, independent check of |t| < 2.776
        let m = d.iter().sum::<f64>() / 5.0;
        let sd = (d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0).sqrt();
        assert!((m / (sd / 5f64.sqrt())).abs() < 2.776);
        assert!(!one_sample_significant(&d));
        let a = [0.5, 0.6, 0.4, 0.55, 0.45];
        let b: Vec<f64> = a.iter().zip(d).map(|(x, e)| x - e).collect();
        let (_, flags) =
            significance_marks(&[Some(&a), Some(&b)], SignificanceRule::PairedT).unwrap();
        assert_eq!(flags, vec![true, true]);
    }

    #[test]
    fn unequal_fold_counts_are_rejected() {
        let a = [0.1, 0.2];
        let b = [0.1, 0.2, 0.3];
        assert!(significance_marks(&[Some(&a), Some(&b)], SignificanceRule::PairedT).is_err());
    }

    #[test]
    fn ci_half_width_uses_sample_sd() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let expected = t_critical(4) * (2.5f64).sqrt() / 5f64.sqrt();
        assert!((ci_half_width(&v) - expected).abs() < 1e-12);
    }
}
