//! Column standardization fit on training rows only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::StateHasher;

/// Per-column z-scoring. Columns with zero spread pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&x, (&m, &s))| if s > 0.0 { (x - m) / s } else { x })
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }

    pub fn fingerprint(&self, h: &mut StateHasher) {
        h.floats(&self.mean).floats(&self.sd);
    }
}

/// Population mean and standard deviation per column.
pub fn fit_standardizer(x: &[Vec<f64>]) -> Result<Standardizer> {
    if x.len() < 2 {
        return Err(Error::invalid("standardizer needs at least 2 rows"));
    }
    let d = x[0].len();
    let n = x.len() as f64;
    let mut mean = vec![0.0; d];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in x {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            // rounding noise on constant columns
            if sd <= 1e-12 {
                0.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Standardizer { mean, sd })
}

/// Column selection followed by optional standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub selected: Option<Vec<usize>>,
    pub standardizer: Option<Standardizer>,
}

impl Preprocessor {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        let picked = match &self.selected {
            Some(cols) => cols.iter().map(|&c| row[c]).collect(),
            None => row.to_vec(),
        };
        match &self.standardizer {
            Some(s) => s.apply_row(&picked),
            None => picked,
        }
    }

    pub fn fingerprint(&self, h: &mut StateHasher) {
        if let Some(sel) = &self.selected {
            h.indices(sel);
        }
        if let Some(s) = &self.standardizer {
            s.fingerprint(h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_is_unchanged() {
        let x = vec![vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 6.0]];
        let s = fit_standardizer(&x).unwrap();
        assert_eq!(s.sd[0], 0.0);
        for r in s.apply(&x) {
            assert_eq!(r[0], 3.0);
        }
    }

    #[test]
    fn train_columns_have_zero_mean_unit_sd() {
        let mut rng = crate::util::rng_from_seed(9);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                (0..4)
                    .map(|j| rand::Rng::random_range(&mut rng, -5.0..5.0) * (j + 1) as f64)
                    .collect()
            })
            .collect();
        let z = fit_standardizer(&x).unwrap().apply(&x);
        for j in 0..4 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / 50.0;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 50.0).sqrt();
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn held_out_rows_use_train_statistics() {
        let train = vec![vec![0.0], vec![2.0], vec![4.0]];
        let s = fit_standardizer(&train).unwrap();
        // train mean 2, population sd sqrt(8/3)
        let sd = (8.0f64 / 3.0).sqrt();
        let out = s.apply_row(&[10.0]);
        assert!((out[0] - 8.0 / sd).abs() < 1e-12);
    }

    #[test]
    fn single_row_is_rejected() {
        assert!(fit_standardizer(&[vec![1.0]]).is_err());
    }
}
