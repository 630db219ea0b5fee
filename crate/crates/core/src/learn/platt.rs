//! Platt scaling: a sigmoid fit over margin scores by regularized maximum
//! likelihood with Newton steps and backtracking.

use serde::{Deserialize, Serialize};

/// `P(y = 1 | s) = 1 / (1 + exp(−(a·s + b)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Platt {
    pub fn prob(&self, score: f64) -> f64 {
        sigmoid(self.a * score + self.b).clamp(1e-15, 1.0 - 1e-15)
    }

    /// Constant calibration at the smoothed class prior `(n₊ + 1)/(n + 2)`.
    pub fn prior(y: &[bool]) -> Self {
        let pos = y.iter().filter(|&&l| l).count() as f64;
        let p = (pos + 1.0) / (y.len() as f64 + 2.0);
        Platt {
            a: 0.0,
            b: (p / (1.0 - p)).ln(),
        }
    }
}

/// Fits `(a, b)` on decision scores with smoothed targets
/// `(n₊ + 1)/(n₊ + 2)` and `1/(n₋ + 2)`. A single-class calibration set
/// falls back to [`Platt::prior`].
pub fn platt_calibrate(scores: &[f64], y: &[bool]) -> Platt {
    let prior1 = y.iter().filter(|&&l| l).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    if prior1 == 0.0 || prior0 == 0.0 {
        log::warn!("single-class calibration set; using the prior probability");
        return Platt::prior(y);
    }
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&l| if l { hi } else { lo }).collect();

    // parameterization p = 1 / (1 + exp(A s + B)); returned as a = −A, b = −B
    let max_iter = 100;
    let min_step = 1e-10;
    let sigma = 1e-12;
    let eps = 1e-5;
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();

    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&s, &ti)| {
                let f = s * a + b;
                if f >= 0.0 {
                    ti * f + (1.0 + (-f).exp()).ln()
                } else {
                    (ti - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };
    let mut fval = nll(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let f = s * a + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            log::debug!("Platt line search failed");
            break;
        }
    }
    Platt { a: -a, b: -b }
}
