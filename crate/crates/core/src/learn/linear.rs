//! Linear SVM with squared hinge loss, trained in the primal by full-batch
//! gradient descent with a backtracking line search.

use serde::{Deserialize, Serialize};

use super::platt::Platt;
use super::{balanced_costs, check_rows, cross_fit_platt, sign, take_rows};
use crate::error::{Error, Result};
use crate::util::StateHasher;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmConfig {
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the relative objective decrease falls below this.
    pub rel_tol: f64,
}

impl Default for LinearSvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 5000,
            rel_tol: 1e-8,
        }
    }
}

impl LinearSvmConfig {
    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Box weights `[negative, positive]` applied to each sample's loss.
    pub class_costs: [f64; 2],
    pub iterations: usize,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn decisions(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.decision(r)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn fingerprint(&self, h: &mut StateHasher) {
        h.floats(&self.weights).floats(&[self.bias]);
    }
}

/// `½‖w‖² + Σ C_i max(0, 1 − y_i f(x_i))²` and its gradient (w then b).
pub fn objective_and_gradient(
    x: &[Vec<f64>],
    ys: &[f64],
    costs: &[f64],
    w: &[f64],
    b: f64,
) -> (f64, Vec<f64>, f64) {
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for ((row, &y), &c) in x.iter().zip(ys).zip(costs) {
        let f = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        let slack = 1.0 - y * f;
        if slack > 0.0 {
            obj += c * slack * slack;
            let coef = -2.0 * c * slack * y;
            gb += coef;
            for (g, v) in gw.iter_mut().zip(row) {
                *g += coef * v;
            }
        }
    }
    (obj, gw, gb)
}

pub fn objective(x: &[Vec<f64>], ys: &[f64], costs: &[f64], w: &[f64], b: f64) -> f64 {
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for ((row, &y), &c) in x.iter().zip(ys).zip(costs) {
        let f = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        let slack = 1.0 - y * f;
        if slack > 0.0 {
            obj += c * slack * slack;
        }
    }
    obj
}

type SparseRows = Vec<Vec<(usize, f64)>>;

fn sparse_rows(x: &[Vec<f64>]) -> SparseRows {
    x.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect()
        })
        .collect()
}

fn margins(x: &SparseRows, w: &[f64], b: f64) -> Vec<f64> {
    x.iter()
        .map(|r| b + r.iter().map(|&(i, v)| w[i] * v).sum::<f64>())
        .collect()
}

fn sparse_objective(x: &SparseRows, ys: &[f64], costs: &[f64], w: &[f64], b: f64) -> f64 {
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for ((f, &y), &c) in margins(x, w, b).into_iter().zip(ys).zip(costs) {
        let slack = 1.0 - y * f;
        if slack > 0.0 {
            obj += c * slack * slack;
        }
    }
    obj
}

fn sparse_objective_and_gradient(
    x: &SparseRows,
    ys: &[f64],
    costs: &[f64],
    w: &[f64],
    b: f64,
) -> (f64, Vec<f64>, f64) {
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (((row, f), &y), &c) in x.iter().zip(margins(x, w, b)).zip(ys).zip(costs) {
        let slack = 1.0 - y * f;
        if slack > 0.0 {
            obj += c * slack * slack;
            let coef = -2.0 * c * slack * y;
            gb += coef;
            for &(i, v) in row {
                gw[i] += coef * v;
            }
        }
    }
    (obj, gw, gb)
}

/// Trains with balanced class weights `C_i = C·n / (2·n_{y_i})`.
pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[bool],
    config: &LinearSvmConfig,
) -> Result<LinearSvmModel> {
    let d = check_rows(x, y.len())?;
    let costs = balanced_costs(y, config.c)?;
    let class_costs = {
        let neg = y.iter().position(|&l| !l).map(|i| costs[i]).unwrap();
        let pos = y.iter().position(|&l| l).map(|i| costs[i]).unwrap();
        [neg, pos]
    };
    let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
    let xs = sparse_rows(x);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut obj, mut gw, mut gb) = sparse_objective_and_gradient(&xs, &ys, &costs, &w, b);
    let mut step = 1.0 / (1.0 + 2.0 * costs.iter().sum::<f64>());
    let mut prev: Option<(Vec<f64>, f64, Vec<f64>, f64)> = None;
    let mut iterations = 0;

    for it in 0..config.max_iter {
        iterations = it + 1;
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2 == 0.0 {
            break;
        }
        // Barzilai–Borwein initial step, then Armijo backtracking
        if let Some((pw, pb, pgw, pgb)) = &prev {
            let mut sy = (b - pb) * (gb - pgb);
            let mut ss = (b - pb) * (b - pb);
            for i in 0..d {
                let s = w[i] - pw[i];
                sy += s * (gw[i] - pgw[i]);
                ss += s * s;
            }
            if sy > 0.0 && ss > 0.0 {
                step = ss / sy;
            }
        }
        let (mut nw, mut nb, mut nobj);
        loop {
            nw = w
                .iter()
                .zip(&gw)
                .map(|(a, g)| a - step * g)
                .collect::<Vec<_>>();
            nb = b - step * gb;
            nobj = sparse_objective(&xs, &ys, &costs, &nw, nb);
            if nobj <= obj - 0.5 * step * gnorm2 || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        if !nobj.is_finite() {
            return Err(Error::Training("linear SVM objective diverged".into()));
        }
        let decrease = obj - nobj;
        let (ngobj, ngw, ngb) = sparse_objective_and_gradient(&xs, &ys, &costs, &nw, nb);
        prev = Some((
            std::mem::replace(&mut w, nw),
            b,
            std::mem::replace(&mut gw, ngw),
            gb,
        ));
        b = nb;
        gb = ngb;
        obj = ngobj;
        if decrease <= config.rel_tol * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        c: config.c,
        class_costs,
        iterations,
    })
}

/// A linear SVM plus a Platt calibration fit on out-of-fold decision values.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedLinear {
    pub model: LinearSvmModel,
    pub platt: Platt,
    pub oof_probs: Vec<f64>,
}

impl CalibratedLinear {
    pub fn prob(&self, x: &[f64]) -> f64 {
        self.platt.prob(self.model.decision(x))
    }
}

pub fn train_calibrated_linear(
    x: &[Vec<f64>],
    y: &[bool],
    config: &LinearSvmConfig,
    seed: u64,
) -> Result<CalibratedLinear> {
    let model = train_linear_svm(x, y, config)?;
    let (platt, oof_probs) = cross_fit_platt(y, seed, |train, test| {
        let ty: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let sub = train_linear_svm(&take_rows(x, train), &ty, config)?;
        Ok(test.iter().map(|&i| sub.decision(&x[i])).collect())
    })?;
    Ok(CalibratedLinear {
        model,
        platt,
        oof_probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_from_seed;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 3 == 0;
            let shift = if pos { 0.8 } else { -0.4 };
            x.push(
                (0..3)
                    .map(|_| rng.random_range(-1.0..1.0) + shift)
                    .collect(),
            );
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn sparse_objective_matches_dense_form() {
        let (mut x, y) = blobs(40, 21);
        for r in x.iter_mut().step_by(3) {
            r[1] = 0.0;
        }
        let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
        let costs = balanced_costs(&y, 0.7).unwrap();
        let w = [0.3, -1.2, 0.5];
        let (o, g, gb) = objective_and_gradient(&x, &ys, &costs, &w, 0.1);
        let (so, sg, sgb) = sparse_objective_and_gradient(&sparse_rows(&x), &ys, &costs, &w, 0.1);
        assert!((o - so).abs() < 1e-10 && (gb - sgb).abs() < 1e-10);
        assert!(g.iter().zip(&sg).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!((objective(&x, &ys, &costs, &w, 0.1) - o).abs() < 1e-10);
    }

    #[test]
    fn calibrated_probabilities_rise_with_the_margin() {
        let (x, y) = blobs(90, 4);
        let cal = train_calibrated_linear(&x, &y, &LinearSvmConfig::with_c(1.0), 3).unwrap();
        assert!(cal.platt.a > 0.0);
        assert_eq!(cal.oof_probs.len(), 90);
        let mut by_margin: Vec<(f64, f64)> = x
            .iter()
            .map(|r| (cal.model.decision(r), cal.prob(r)))
            .collect();
        by_margin.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(by_margin.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(by_margin.iter().all(|(_, p)| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn separates_two_points() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = train_linear_svm(&x, &[false, true], &LinearSvmConfig::with_c(100.0)).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(!m.predict(&x[0]) && m.predict(&x[1]));
    }

    #[test]
    fn solution_beats_random_perturbations() {
        let (x, y) = blobs(60, 1);
        let cfg = LinearSvmConfig::with_c(1.0);
        let m = train_linear_svm(&x, &y, &cfg).unwrap();
        let costs = balanced_costs(&y, 1.0).unwrap();
        let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
        let best = objective(&x, &ys, &costs, &m.weights, m.bias);
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let mut dir: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v *= 1e-3 / norm);
            let w: Vec<f64> = m.weights.iter().zip(&dir).map(|(a, d)| a + d).collect();
            let other = objective(&x, &ys, &costs, &w, m.bias + dir[3]);
            assert!(best <= other, "{best} > {other}");
        }
    }

    #[test]
    fn scaled_feature_duplication_keeps_the_boundary() {
        let (x, y) = blobs(45, 3);
        let cfg = LinearSvmConfig::with_c(0.5);
        let base = train_linear_svm(&x, &y, &cfg).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let dup: Vec<Vec<f64>> = x
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v * r)
                    .chain(row.iter().map(|v| v * r))
                    .collect()
            })
            .collect();
        let twin = train_linear_svm(&dup, &y, &cfg).unwrap();
        for (a, b) in x.iter().zip(&dup) {
            assert!((base.decision(a) - twin.decision(b)).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_samples_with_halved_c_keep_the_boundary() {
        let (x, y) = blobs(30, 4);
        let base = train_linear_svm(&x, &y, &LinearSvmConfig::with_c(0.2)).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<bool> = y.iter().chain(&y).copied().collect();
        let twin = train_linear_svm(&x2, &y2, &LinearSvmConfig::with_c(0.1)).unwrap();
        for row in &x {
            assert!((base.decision(row) - twin.decision(row)).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_feature_gets_zero_weight() {
        let (mut x, y) = blobs(40, 5);
        x.iter_mut().for_each(|r| r.push(0.0));
        let m = train_linear_svm(&x, &y, &LinearSvmConfig::default()).unwrap();
        assert!(m.weights[3].abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_single_class() {
        let x = vec![vec![f64::NAN], vec![1.0]];
        assert!(train_linear_svm(&x, &[true, false], &LinearSvmConfig::default()).is_err());
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_linear_svm(&x, &[true, true], &LinearSvmConfig::default()).is_err());
    }
}
