//! Dense tensors with hand-written reverse-mode gradients for exactly the
//! layers the text CNN needs, the Nadam optimizer and a central-difference
//! gradient checker.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut Rng) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// A trainable tensor with its gradient buffer (always the value's shape).
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = vec![0.0; value.len()];
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Which window won the max-pool for each feature map (`None` when the
/// post-ReLU output is zero and no gradient flows).
#[derive(Debug, Clone)]
pub struct ConvCache {
    argmax: Vec<Option<usize>>,
}

/// Valid 1-D convolution over time, ReLU, then max over time.
///
/// `input` is `seq_len × emb_dim` row-major; `filters` is
/// `width × emb_dim × n_maps`. Windows starting at or after `valid_len` cover
/// only padding and are masked out of the pool; with no valid window the
/// output is zero.
pub fn conv1d_maxpool_masked(
    input: &[f64],
    seq_len: usize,
    valid_len: usize,
    filters: &Tensor,
    bias: &[f64],
) -> Result<(Vec<f64>, ConvCache)> {
    let [width, emb, maps] = filter_dims(filters)?;
    if input.len() != seq_len * emb {
        return Err(Error::Dimension(format!(
            "conv input has {} values, expected {seq_len}x{emb}",
            input.len()
        )));
    }
    if bias.len() != maps {
        return Err(Error::Dimension(format!(
            "conv bias {} != maps {maps}",
            bias.len()
        )));
    }
    if seq_len < width {
        return Err(Error::invalid(format!(
            "sequence length {seq_len} shorter than filter width {width}"
        )));
    }
    let windows = (seq_len - width + 1).min(valid_len);
    let mut best = vec![f64::NEG_INFINITY; maps];
    let mut argmax = vec![None; maps];
    let mut z = vec![0.0; maps];
    let w = &filters.data;
    for t in 0..windows {
        z.copy_from_slice(bias);
        for k in 0..width {
            let row = &input[(t + k) * emb..(t + k + 1) * emb];
            for (e, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let f = &w[(k * emb + e) * maps..(k * emb + e + 1) * maps];
                for (zm, &fm) in z.iter_mut().zip(f) {
                    *zm += x * fm;
                }
            }
        }
        for m in 0..maps {
            if z[m] > best[m] {
                best[m] = z[m];
                argmax[m] = Some(t);
            }
        }
    }
    let mut out = vec![0.0; maps];
    for m in 0..maps {
        if best[m] > 0.0 {
            out[m] = best[m];
        } else {
            argmax[m] = None;
        }
    }
    Ok((out, ConvCache { argmax }))
}

/// Unmasked form: every window is valid.
pub fn conv1d_maxpool(
    input: &[f64],
    seq_len: usize,
    filters: &Tensor,
    bias: &[f64],
) -> Result<(Vec<f64>, ConvCache)> {
    conv1d_maxpool_masked(input, seq_len, seq_len, filters, bias)
}

fn filter_dims(filters: &Tensor) -> Result<[usize; 3]> {
    match filters.shape.as_slice() {
        &[w, e, m] => Ok([w, e, m]),
        s => Err(Error::Dimension(format!("filters must be 3-D, got {s:?}"))),
    }
}

/// Accumulates gradients of [`conv1d_maxpool_masked`] into the given buffers.
pub fn conv1d_maxpool_backward(
    input: &[f64],
    filters: &Tensor,
    cache: &ConvCache,
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_filters: &mut [f64],
    grad_bias: &mut [f64],
) {
    let [width, emb, maps] = filter_dims(filters).expect("checked in forward");
    let mut grad_input = grad_input;
    for m in 0..maps {
        let Some(t) = cache.argmax[m] else { continue };
        let g = grad_out[m];
        if g == 0.0 {
            continue;
        }
        grad_bias[m] += g;
        for k in 0..width {
            for e in 0..emb {
                let idx = (k * emb + e) * maps + m;
                grad_filters[idx] += g * input[(t + k) * emb + e];
                if let Some(gi) = grad_input.as_deref_mut() {
                    gi[(t + k) * emb + e] += g * filters.data[idx];
                }
            }
        }
    }
}

/// `weights` is `out × in` row-major.
pub fn dense(input: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = match weights.shape.as_slice() {
        &[r, c] => (r, c),
        s => {
            return Err(Error::Dimension(format!(
                "dense weights must be 2-D, got {s:?}"
            )))
        }
    };
    if cols != input.len() || rows != bias.len() {
        return Err(Error::Dimension(format!(
            "dense {rows}x{cols} applied to input {} with bias {}",
            input.len(),
            bias.len()
        )));
    }
    Ok(weights
        .data
        .chunks_exact(cols)
        .zip(bias)
        .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
        .collect())
}

pub fn dense_backward(
    input: &[f64],
    weights: &Tensor,
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
) {
    let cols = input.len();
    for (r, &g) in grad_out.iter().enumerate() {
        grad_bias[r] += g;
        if g == 0.0 {
            continue;
        }
        for (gw, &x) in grad_weights[r * cols..(r + 1) * cols].iter_mut().zip(input) {
            *gw += g * x;
        }
    }
    if let Some(gi) = grad_input {
        for (r, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (gx, &w) in gi.iter_mut().zip(&weights.data[r * cols..(r + 1) * cols]) {
                *gx += g * w;
            }
        }
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through ReLU given its output.
pub fn relu_backward(output: &[f64], grad_out: &[f64]) -> Vec<f64> {
    output
        .iter()
        .zip(grad_out)
        .map(|(&y, &g)| if y > 0.0 { g } else { 0.0 })
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy. Returns `(loss, d loss / d logits)`.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Dimension(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let probs = softmax(logits);
    let mut grad = probs;
    grad[label] -= 1.0;
    Ok((lse - logits[label], grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (0 or 1/(1-rate)) for the backward pass.
pub fn dropout(x: &[f64], rate: f64, mode: Mode, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    if mode == Mode::Eval || rate <= 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    (x.iter().zip(&mask).map(|(v, m)| v * m).collect(), mask)
}

/// Nesterov-accelerated Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct NadamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl NadamState {
    pub fn new(params: &[&Param], learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
        }
    }

    /// One update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for p in params.iter() {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        self.t += 1;
        let t = self.t as f64;
        let (b1, b2) = (self.beta1, self.beta2);
        let corr1_next = 1.0 - b1.powf(t + 1.0);
        let corr1 = 1.0 - b1.powf(t);
        let corr2 = 1.0 - b2.powf(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.value.len() != m.len() {
                return Err(Error::Dimension(format!(
                    "parameter {} changed shape",
                    p.name
                )));
            }
            for i in 0..m.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = b1 * m[i] / corr1_next + (1.0 - b1) * g / corr1;
                let v_hat = v[i] / corr2;
                p.value.data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Central-difference check of `analytic` against `f` at `x`.
///
/// Returns the largest `|a - n| / max(|a| + |n|, floor)`.
pub fn max_relative_error(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    step: f64,
    floor: f64,
) -> f64 {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}
