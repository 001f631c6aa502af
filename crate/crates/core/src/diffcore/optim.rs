//! Adam with L2 weight decay and a multi-step learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub milestones: Vec<usize>,
    pub lr_gamma: f64,
    pub focal_gamma: f64,
    pub focal_omega: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            milestones: vec![30, 60, 90],
            lr_gamma: 0.5,
            focal_gamma: 1.5,
            focal_omega: 0.5,
            l2_lambda: 1e-4,
            epochs: 100,
            batch_size: 16,
            seed: 2024,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return bad("milestones must be strictly increasing");
        }
        if !(self.lr_gamma > 0.0) {
            return bad("lr_gamma must be positive");
        }
        if !(self.focal_gamma >= 0.0) {
            return bad("focal_gamma must be non-negative");
        }
        if !(self.focal_omega > 0.0 && self.focal_omega <= 1.0) {
            return bad("focal_omega must lie in (0, 1]");
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// Learning rate in effect during `epoch` (0-based).
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let passed = cfg.milestones.iter().filter(|&&m| m <= epoch).count();
    cfg.learning_rate * cfg.lr_gamma.powi(passed as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2_lambda: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2_lambda: 0.0,
        }
    }
}

/// One Adam update from the gradients stored in `store`. `t` is the 1-based
/// step count. Parameters are left untouched if any gradient is non-finite.
pub fn adam_step<R: Real>(
    store: &mut ParamStore<R>,
    lr: f64,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("adam step count starts at 1".into()));
    }
    for (id, name, tensor) in store.iter() {
        if let Some(g) = tensor.grad() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {} at {name}[{i}] (parameter {})",
                    g[i], id.0
                )));
            }
        }
    }
    let (b1, b2) = (R::lit(cfg.beta1), R::lit(cfg.beta2));
    let c1 = R::lit(1.0 - cfg.beta1.powf(t as f64));
    let c2 = R::lit(1.0 - cfg.beta2.powf(t as f64));
    let (lr, eps, l2) = (R::lit(lr), R::lit(cfg.eps), R::lit(cfg.l2_lambda));
    let one = R::one();
    for i in 0..store.len() {
        let id = super::ParamId(i);
        let tensor = store.get(id);
        let grad: Vec<R> = match tensor.grad() {
            Some(g) => g
                .iter()
                .zip(tensor.data())
                .map(|(&g, &w)| g + l2 * w)
                .collect(),
            None => tensor.data().iter().map(|&w| l2 * w).collect(),
        };
        let mut m = std::mem::take(&mut store.first_moment[i]);
        let mut v = std::mem::take(&mut store.second_moment[i]);
        let data = store.get_mut(id).data_mut();
        for (((w, g), m), v) in data
            .iter_mut()
            .zip(&grad)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w = *w - lr * mhat / (vhat.sqrt() + eps);
        }
        store.first_moment[i] = m;
        store.second_moment[i] = v;
    }
    Ok(())
}
