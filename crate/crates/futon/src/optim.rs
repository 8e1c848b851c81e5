//! First-order training machinery: Adam with bias correction, the cosine
//! learning-rate schedule, minibatch coordinate sampling, and the two
//! regularizers used by the inverse-problem pipelines.

use rand::rngs::StdRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSignal;

/// Training hyperparameters. One epoch is one sampled-batch step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Fraction of all grid coordinates per step, in (0, 1].
    pub batch_fraction: f64,
    pub lr0: f64,
    /// Final learning rate as a fraction of `lr0`, in (0, 1].
    pub lr_final_ratio: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub tv_lambda: f64,
    pub weight_decay_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_fraction: 0.1,
            lr0: 1e-2,
            lr_final_ratio: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            tv_lambda: 0.0,
            weight_decay_lambda: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::config("batch_fraction must be in (0, 1]"));
        }
        if self.lr0 <= 0.0 {
            return Err(Error::config("lr0 must be positive"));
        }
        if !(self.lr_final_ratio > 0.0 && self.lr_final_ratio <= 1.0) {
            return Err(Error::config("lr_final_ratio must be in (0, 1]"));
        }
        if self.tv_lambda < 0.0 || self.weight_decay_lambda < 0.0 {
            return Err(Error::config("regularizer weights must be non-negative"));
        }
        Ok(())
    }
}

/// Adam state over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn with_defaults(n_params: usize) -> Self {
        Adam::new(n_params, 0.9, 0.999, 1e-8)
    }

    /// One bias-corrected update:
    /// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
    /// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam: params {}, grads {}, state {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if lr <= 0.0 {
            return Err(Error::domain("learning rate must be positive"));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Cosine-annealed learning rate: `lr(t) = lr_end + (lr0 - lr_end) *
/// (1 + cos(pi t / T)) / 2` with `lr_end = ratio * lr0`.
pub fn cosine_anneal(t: usize, total: usize, lr0: f64, ratio: f64) -> Result<f64> {
    if t > total {
        return Err(Error::domain(format!("step {t} beyond schedule length {total}")));
    }
    if total == 0 {
        return Ok(lr0);
    }
    let lr_end = ratio * lr0;
    let cos = (std::f64::consts::PI * t as f64 / total as f64).cos();
    Ok(lr_end + (lr0 - lr_end) * (1.0 + cos) / 2.0)
}

/// `ceil(fraction * n)` distinct indices in `[0, n)`, uniform without
/// replacement, in draw order. A partial Fisher-Yates shuffle, so the result
/// is a deterministic function of the generator state.
pub fn sample_batch(rng: &mut StdRng, n: usize, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain("batch fraction must be in (0, 1]"));
    }
    let target = fraction * n as f64;
    // round-to-nearest when the product is within float noise of an integer,
    // otherwise ceil (0.1 * 100 must give 10, not 11)
    let m = if (target - target.round()).abs() < 1e-9 {
        target.round() as usize
    } else {
        target.ceil() as usize
    };
    let m = m.clamp(1, n.max(1)).min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + rng.random_range(0..n - i);
        pool.swap(i, j);
    }
    pool.truncate(m);
    Ok(pool)
}

/// Isotropic, epsilon-smoothed total variation of a 2-D signal with forward
/// differences: `sum_pixels sqrt(dr^2 + dc^2 + eps^2)` summed over channels,
/// together with its exact gradient with respect to every pixel value.
pub fn tv_loss(pred: &GridSignal) -> Result<(f64, GridSignal)> {
    const EPS: f64 = 1e-8;
    if pred.dims().len() != 2 {
        return Err(Error::shape(format!(
            "TV regularizer is defined for 2-D signals, got {}-D",
            pred.dims().len()
        )));
    }
    let (rows, cols) = (pred.dims()[0], pred.dims()[1]);
    let ch = pred.channels();
    let mut grad = GridSignal::zeros(pred.dims().to_vec(), ch, pred.range())?;
    let mut total = 0.0;
    let at = |i: usize, j: usize, c: usize| pred.data()[(i * cols + j) * ch + c];
    for i in 0..rows {
        for j in 0..cols {
            for c in 0..ch {
                let v = at(i, j, c);
                let dr = if i + 1 < rows { at(i + 1, j, c) - v } else { 0.0 };
                let dc = if j + 1 < cols { at(i, j + 1, c) - v } else { 0.0 };
                let mag = (dr * dr + dc * dc + EPS * EPS).sqrt();
                total += mag;
                let gdata = grad.data_mut();
                let idx = (i * cols + j) * ch + c;
                gdata[idx] += -(dr + dc) / mag;
                if i + 1 < rows {
                    gdata[((i + 1) * cols + j) * ch + c] += dr / mag;
                }
                if j + 1 < cols {
                    gdata[(i * cols + j + 1) * ch + c] += dc / mag;
                }
            }
        }
    }
    Ok((total, grad))
}

/// L2 weight decay: adds `lambda * theta` to the flat gradient (the gradient
/// of the loss-coupled penalty `lambda/2 ||theta||^2`).
pub fn add_weight_decay(params: &[f64], lambda: f64, grads: &mut [f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape("weight decay: params/grads length mismatch"));
    }
    if lambda == 0.0 {
        return Ok(());
    }
    for (g, &p) in grads.iter_mut().zip(params) {
        *g += lambda * p;
    }
    Ok(())
}
