//! Univariate ANOVA F-test feature ranking for binary labels.

use crate::error::{Error, Result};
use crate::features::SparseVec;

/// Per-column F statistics. Group values are sorted before summation so the
/// result does not depend on row order.
fn f_from_columns<'a, I>(n_cols: usize, y: &[bool], rows: I) -> Result<Vec<f64>>
where
    I: Iterator<Item = (usize, &'a [(usize, f64)])>,
{
    let n1 = y.iter().filter(|&&l| l).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("ANOVA selection needs both classes"));
    }
    let counts = [n0 as f64, n1 as f64];
    let n = y.len() as f64;

    // explicit (non-zero) values per column and group
    let mut values: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; n_cols];
    for (r, entries) in rows {
        let g = usize::from(y[r]);
        for &(c, v) in entries {
            if v != 0.0 {
                values[c][g].push(v);
            }
        }
    }

    let mut f = vec![0.0; n_cols];
    for (c, groups) in values.iter_mut().enumerate() {
        for g in groups.iter_mut() {
            g.sort_by(f64::total_cmp);
        }
        let nnz = groups[0].len() + groups[1].len();
        let mut lo = groups
            .iter()
            .filter_map(|g| g.first())
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut hi = groups
            .iter()
            .filter_map(|g| g.last())
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if nnz < y.len() {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if lo == hi {
            continue;
        }
        let sums = [groups[0].iter().sum::<f64>(), groups[1].iter().sum::<f64>()];
        let means = [sums[0] / counts[0], sums[1] / counts[1]];
        let mut within = 0.0;
        for g in 0..2 {
            let zeros = counts[g] - groups[g].len() as f64;
            within += groups[g]
                .iter()
                .map(|v| (v - means[g]) * (v - means[g]))
                .sum::<f64>();
            within += zeros * means[g] * means[g];
        }
        let grand = (sums[0] + sums[1]) / n;
        let between: f64 = (0..2).map(|g| counts[g] * (means[g] - grand).powi(2)).sum();
        f[c] = if within <= 0.0 {
            f64::INFINITY
        } else {
            between / (within / (n - 2.0))
        };
    }
    Ok(f)
}

/// One-way F statistic per column between the two label groups.
/// Constant columns score 0.
pub fn anova_f_scores(x: &[Vec<f64>], y: &[bool]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows, {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x.first().map_or(0, Vec::len);
    let rows: Vec<Vec<(usize, f64)>> = x
        .iter()
        .map(|r| r.iter().copied().enumerate().collect())
        .collect();
    f_from_columns(
        d,
        y,
        rows.iter().enumerate().map(|(i, r)| (i, r.as_slice())),
    )
}

pub fn anova_f_scores_sparse(x: &[SparseVec], y: &[bool]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows, {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x.first().map_or(0, |r| r.dim);
    let rows: Vec<Vec<(usize, f64)>> = x.iter().map(|r| r.iter().collect()).collect();
    f_from_columns(
        d,
        y,
        rows.iter().enumerate().map(|(i, r)| (i, r.as_slice())),
    )
}

/// Indices of the `k` highest-F columns (ties to the lower index), ascending.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

pub fn anova_f_select(x: &[Vec<f64>], y: &[bool], k: usize) -> Result<Vec<usize>> {
    top_k(&anova_f_scores(x, y)?, k)
}

pub fn anova_f_select_sparse(x: &[SparseVec], y: &[bool], k: usize) -> Result<Vec<usize>> {
    top_k(&anova_f_scores_sparse(x, y)?, k)
}
