//! RBF-kernel soft-margin SVM solved in the dual by sequential minimal
//! optimization with maximal-violating-pair working-set selection.

use serde::{Deserialize, Serialize};

use super::platt::Platt;
use super::{balanced_costs, check_rows, class_counts, cross_fit_platt, sign, take_rows};
use crate::error::{Error, Result};
use crate::util::StateHasher;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfSvmConfig {
    pub c: f64,
    /// `None` means `1 / (d · var(X))` over all training entries.
    pub gamma: Option<f64>,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub balanced: bool,
}

impl Default for RbfSvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 1_000_000,
            balanced: true,
        }
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Default kernel width: `1 / (d · var)` with the variance over all entries.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(0, Vec::len);
    let n = (x.len() * d) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.iter().flatten().sum::<f64>() / n;
    let var = x
        .iter()
        .flatten()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Result of solving the dual
/// `min ½ αᵀQα − Σα  s.t.  yᵀα = 0, 0 ≤ α_i ≤ C_i` with `Q_ij = y_i y_j K_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Final maximal violation `m(α) − M(α)`.
    pub violation: f64,
}

/// SMO over a precomputed kernel matrix (`n × n`, row-major).
pub fn solve_dual(
    kernel: &[f64],
    y: &[f64],
    upper: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<DualSolution> {
    let n = y.len();
    if kernel.len() != n * n || upper.len() != n {
        return Err(Error::Dimension(
            "kernel / bounds do not match labels".into(),
        ));
    }
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut violation = f64::INFINITY;

    let in_up = |a: f64, yi: f64, c: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64, c: f64| (yi < 0.0 && a < c) || (yi > 0.0 && a > 0.0);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], upper[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t], upper[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        violation = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || violation < tol {
            break;
        }
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        let (qii, qjj) = (q(i, i), q(j, j));
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = dual_objective(kernel, y, &alpha);
    Ok(DualSolution {
        alpha,
        bias: -rho,
        objective,
        iterations,
        violation,
    })
}

/// `½ αᵀQα − Σα`.
pub fn dual_objective(kernel: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i * n + j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    /// Box bounds `[negative, positive]`.
    pub class_costs: [f64; 2],
    pub calibration: Option<Platt>,
    pub iterations: usize,
    pub objective: f64,
}

impl RbfSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.dual_coef)
                .map(|(sv, a)| a * rbf(self.gamma, sv, x))
                .sum::<f64>()
    }

    pub fn decisions(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.decision(r)).collect()
    }

    /// Calibrated positive-class probability (requires a calibration).
    pub fn predict_prob(&self, x: &[f64]) -> Option<f64> {
        self.calibration.map(|p| p.prob(self.decision(x)))
    }

    pub fn fingerprint(&self, h: &mut StateHasher) {
        for sv in &self.support_vectors {
            h.floats(sv);
        }
        h.floats(&self.dual_coef).floats(&[self.bias, self.gamma]);
        if let Some(p) = self.calibration {
            h.floats(&[p.a, p.b]);
        }
    }
}

/// Fits an uncalibrated RBF SVM. Support vectors are the rows with `α > 0`.
pub fn train_rbf_svm(x: &[Vec<f64>], y: &[bool], config: &RbfSvmConfig) -> Result<RbfSvmModel> {
    check_rows(x, y.len())?;
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(x));
    let kernel = kernel_matrix(x, gamma);
    fit_with_kernel(x, y, config, gamma, &kernel)
}

fn fit_with_kernel(
    x: &[Vec<f64>],
    y: &[bool],
    config: &RbfSvmConfig,
    gamma: f64,
    kernel: &[f64],
) -> Result<RbfSvmModel> {
    let costs = if config.balanced {
        balanced_costs(y, config.c)?
    } else {
        let (p, n) = class_counts(y);
        if p == 0 || n == 0 {
            return Err(Error::invalid("both classes must be present"));
        }
        vec![config.c; y.len()]
    };
    let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
    let sol = solve_dual(kernel, &ys, &costs, config.tol, config.max_iter)?;
    if !sol.bias.is_finite() {
        return Err(Error::Training("SMO produced a non-finite bias".into()));
    }
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coef.push(a * ys[i]);
        }
    }
    let neg = y.iter().position(|&l| !l).map_or(config.c, |i| costs[i]);
    let pos = y.iter().position(|&l| l).map_or(config.c, |i| costs[i]);
    Ok(RbfSvmModel {
        support_vectors,
        dual_coef,
        bias: sol.bias,
        gamma,
        c: config.c,
        class_costs: [neg, pos],
        calibration: None,
        iterations: sol.iterations,
        objective: sol.objective,
    })
}

/// An RBF SVM with Platt calibration fit on out-of-fold decision scores,
/// together with those out-of-fold probabilities for the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedRbf {
    pub model: RbfSvmModel,
    pub oof_probs: Vec<f64>,
}

/// Trains the final SVM on all rows and calibrates it with internal
/// cross-fitting (see [`cross_fit_platt`]).
pub fn train_calibrated_rbf(
    x: &[Vec<f64>],
    y: &[bool],
    config: &RbfSvmConfig,
    seed: u64,
) -> Result<CalibratedRbf> {
    check_rows(x, y.len())?;
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(x));
    let kernel = kernel_matrix(x, gamma);
    let mut model = fit_with_kernel(x, y, config, gamma, &kernel)?;
    let n = x.len();
    let (platt, oof_probs) = cross_fit_platt(y, seed, |train, test| {
        let ty: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let sub_kernel: Vec<f64> = train
            .iter()
            .flat_map(|&i| train.iter().map(move |&j| (i, j)))
            .map(|(i, j)| kernel[i * n + j])
            .collect();
        let sub = fit_with_kernel(&take_rows(x, train), &ty, config, gamma, &sub_kernel)?;
        Ok(test.iter().map(|&i| sub.decision(&x[i])).collect())
    })?;
    model.calibration = Some(platt);
    Ok(CalibratedRbf { model, oof_probs })
}
