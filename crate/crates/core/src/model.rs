//! Linear softmax head and its optimizer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::confidence::ConfidenceMatrix;
use crate::config::OptimConfig;
use crate::error::{Error, Result};
use crate::math;

/// `logits = W x + b` with `W` stored row-major as `c x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    c: usize,
    d: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(c: usize, d: usize) -> Self {
        Self {
            c,
            d,
            weights: vec![0.0; c * d],
            bias: vec![0.0; c],
        }
    }

    pub fn from_parts(c: usize, d: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != c * d || bias.len() != c {
            return Err(Error::shape(format!("parameters do not match a {c}x{d} head")));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { c, d, weights, bias })
    }

    /// Row `k` holds `[W_k, b_k]`, giving a `c x (d + 1)` matrix.
    pub fn to_rows(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.c * (self.d + 1));
        for k in 0..self.c {
            out.extend_from_slice(&self.weights[k * self.d..(k + 1) * self.d]);
            out.push(self.bias[k]);
        }
        out
    }

    pub fn from_rows(c: usize, width: usize, rows: &[f64]) -> Result<Self> {
        if width < 2 || rows.len() != c * width {
            return Err(Error::shape("checkpoint rows must be c x (d + 1)"));
        }
        let d = width - 1;
        let mut weights = Vec::with_capacity(c * d);
        let mut bias = Vec::with_capacity(c);
        for row in rows.chunks_exact(width) {
            weights.extend_from_slice(&row[..d]);
            bias.push(row[d]);
        }
        Self::from_parts(c, d, weights, bias)
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn logits_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.d)
                .zip(&self.bias)
                .map(|(w, b)| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.c);
        self.logits_into(x, &mut out);
        out
    }

    /// Adds the parameter gradient for one example given `dL/dlogits`.
    pub fn accumulate_grad(&mut self, x: &[f64], logit_grad: &[f64]) {
        for (k, &g) in logit_grad.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &mut self.weights[k * self.d..(k + 1) * self.d];
            row.iter_mut().zip(x).for_each(|(w, x)| *w += g * x);
            self.bias[k] += g;
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    /// Hard predictions for `n x d` rows.
    pub fn predict(&self, rows: &[f64]) -> Result<Vec<usize>> {
        Ok(predict_proba(self, rows)?.argmax())
    }
}

/// Softmax of the head's logits for every row of an `n x d` matrix.
pub fn predict_proba(model: &LinearModel, rows: &[f64]) -> Result<ConfidenceMatrix> {
    if !rows.len().is_multiple_of(model.d) {
        return Err(Error::shape(format!(
            "rows are not a multiple of the model width {}",
            model.d
        )));
    }
    let one = |x: &[f64]| -> Result<Vec<f64>> { math::softmax_row(&model.logits(x)) };

    #[cfg(feature = "parallel")]
    let probs: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        rows.par_chunks_exact(model.d).map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let probs: Vec<Vec<f64>> = rows.chunks_exact(model.d).map(one).collect::<Result<_>>()?;

    ConfidenceMatrix::new(model.c, probs.concat())
}

/// Momentum buffer plus step/epoch counters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: LinearModel,
    pub step: u64,
    pub epoch: u64,
}

impl OptimizerState {
    pub fn new(model: &LinearModel) -> Self {
        Self {
            velocity: LinearModel::zeros(model.c, model.d),
            step: 0,
            epoch: 0,
        }
    }
}

/// Coupled SGD: `v = momentum * v + g + wd * theta; theta -= lr * v`.
pub fn sgd_step(
    model: &mut LinearModel,
    grads: &LinearModel,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &OptimConfig,
) -> Result<()> {
    if grads.c != model.c || grads.d != model.d || state.velocity.c != model.c || state.velocity.d != model.d {
        return Err(Error::shape("gradient or optimizer state does not match the model"));
    }
    if grads.params().any(|g| !g.is_finite()) {
        return Err(Error::Diverged);
    }
    for ((theta, v), g) in model.params_mut().zip(state.velocity.params_mut()).zip(grads.params()) {
        *v = cfg.momentum * *v + g + cfg.weight_decay * *theta;
        *theta -= lr * *v;
        if !theta.is_finite() {
            return Err(Error::Diverged);
        }
    }
    state.step += 1;
    Ok(())
}

/// Constant warmup rate, then cosine annealing from `lr` over the remaining
/// epochs (per-epoch schedule).
pub fn lr_at(epoch: usize, cfg: &OptimConfig) -> f64 {
    if epoch < cfg.warmup_epochs {
        return cfg.warmup_lr;
    }
    let span = (cfg.epochs - cfg.warmup_epochs) as f64;
    let progress = (epoch - cfg.warmup_epochs) as f64 / span;
    cfg.lr * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress))
}

/// Fresh head: weights uniform in `(-1/sqrt(d), 1/sqrt(d))`, zero bias.
/// `iteration` selects an independent ChaCha stream under `seed`.
pub fn reinit(c: usize, d: usize, seed: u64, iteration: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let bound = 1.0 / libm::sqrt(d as f64);
    let weights = (0..c * d).map(|_| rng.random_range(-bound..bound)).collect();
    LinearModel {
        c,
        d,
        weights,
        bias: vec![0.0; c],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let m = LinearModel::zeros(4, 3);
        let p = predict_proba(&m, &[1.0, 2.0, 3.0, -1.0, 0.0, 5.0]).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn one_dim_example() {
        let m = LinearModel::from_parts(2, 1, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let p = predict_proba(&m, &[2.0]).unwrap();
        let expect = math::softmax_row(&[2.0, -2.0]).unwrap();
        assert_eq!(p.row(0), expect.as_slice());
        assert!(predict_proba(&m, &[]).unwrap().is_empty());
        let wide = LinearModel::zeros(2, 3);
        assert!(predict_proba(&wide, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn plain_gradient_descent() {
        let cfg = OptimConfig {
            momentum: 0.0,
            weight_decay: 0.0,
            ..OptimConfig::default()
        };
        let mut m = LinearModel::from_parts(1, 2, vec![1.0, 2.0], vec![0.5]).unwrap();
        let g = LinearModel::from_parts(1, 2, vec![0.5, -1.0], vec![2.0]).unwrap();
        let mut s = OptimizerState::new(&m);
        sgd_step(&mut m, &g, &mut s, 0.1, &cfg).unwrap();
        assert_eq!(m.weights, vec![1.0 - 0.05, 2.0 + 0.1]);
        assert_eq!(m.bias, vec![0.5 - 0.2]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn decay_only_shrinks() {
        let cfg = OptimConfig {
            momentum: 0.0,
            weight_decay: 0.5,
            ..OptimConfig::default()
        };
        let mut m = LinearModel::from_parts(1, 1, vec![2.0], vec![-4.0]).unwrap();
        let g = LinearModel::zeros(1, 1);
        let mut s = OptimizerState::new(&m);
        sgd_step(&mut m, &g, &mut s, 0.1, &cfg).unwrap();
        assert!((m.weights[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
        assert!((m.bias[0] + 4.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps() {
        // hand simulation, momentum 0.9, wd 0.1, lr 0.5, scalar weight
        // step 1: v = 0 + 1 + 0.1*1 = 1.1; w = 1 - 0.55 = 0.45
        // step 2: v = 0.99 + 1 + 0.045 = 2.035; w = 0.45 - 1.0175 = -0.5675
        let cfg = OptimConfig {
            momentum: 0.9,
            weight_decay: 0.1,
            ..OptimConfig::default()
        };
        let mut m = LinearModel::from_parts(1, 1, vec![1.0], vec![0.0]).unwrap();
        let g = LinearModel::from_parts(1, 1, vec![1.0], vec![0.0]).unwrap();
        let mut s = OptimizerState::new(&m);
        sgd_step(&mut m, &g, &mut s, 0.5, &cfg).unwrap();
        assert!((s.velocity.weights[0] - 1.1).abs() < 1e-15);
        assert!((m.weights[0] - 0.45).abs() < 1e-15);
        sgd_step(&mut m, &g, &mut s, 0.5, &cfg).unwrap();
        assert!((s.velocity.weights[0] - 2.035).abs() < 1e-14);
        assert!((m.weights[0] + 0.5675).abs() < 1e-14);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let cfg = OptimConfig::default();
        let mut m = LinearModel::zeros(1, 1);
        let g = LinearModel::from_parts(1, 1, vec![0.0], vec![0.0]).map(|mut g| {
            g.weights[0] = f64::NAN;
            g
        });
        let mut s = OptimizerState::new(&m);
        assert_eq!(sgd_step(&mut m, &g.unwrap(), &mut s, 0.1, &cfg), Err(Error::Diverged));
    }

    #[test]
    fn schedule_closed_form() {
        let cfg = OptimConfig::default();
        assert_eq!(lr_at(0, &cfg), 1e-4);
        assert_eq!(lr_at(1, &cfg), 1e-4);
        assert!((lr_at(2, &cfg) - 0.02).abs() < 1e-12);
        let last = 0.02 * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * 47.0 / 48.0));
        assert!((lr_at(49, &cfg) - last).abs() < 1e-12);
        for e in 2..50 {
            let expect = 0.02 * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * (e - 2) as f64 / 48.0));
            assert!((lr_at(e, &cfg) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn reinit_is_seeded() {
        let a = reinit(3, 16, 7, 1);
        assert_eq!(a, reinit(3, 16, 7, 1));
        assert_ne!(a, reinit(3, 16, 7, 2));
        assert!(a.bias.iter().all(|&b| b == 0.0));
        assert!(a.weights.iter().all(|w| w.abs() < 0.25));
    }

    #[test]
    fn checkpoint_rows_round_trip() {
        let m = reinit(3, 4, 1, 0);
        let rows = m.to_rows();
        assert_eq!(LinearModel::from_rows(3, 5, &rows).unwrap(), m);
    }
}
