use super::ParamStore;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay applied to weights (not biases) each step, scaled by
    /// the current learning rate.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: ParamStore,
    pub v: ParamStore,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        AdamState {
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], cfg: &AdamConfig, lr_t: f64) {
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        p[i] -= lr_t * m[i] / (v[i].sqrt() + cfg.eps);
    }
}

/// One bias-corrected Adam update with learning rate `lr`. Parameters without
/// a gradient entry are left untouched.
pub fn optimizer_step(
    params: &mut ParamStore,
    grads: &ParamStore,
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads.iter() {
        let p = params
            .get(name)
            .ok_or_else(|| Error::shape(name, "gradient for an unknown parameter"))?;
        if p.weight.shape() != g.weight.shape() || p.bias.shape() != g.bias.shape() {
            return Err(Error::shape(name, "gradient shape differs from parameter"));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let lr_t = lr * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t));
    for (name, g) in grads.iter() {
        let p = params.get_mut(name).expect("checked above");
        let m = state.m.get_mut(name).ok_or_else(|| Error::shape(name, "missing optimizer moment"))?;
        let v = state.v.get_mut(name).ok_or_else(|| Error::shape(name, "missing optimizer moment"))?;
        if cfg.weight_decay > 0.0 {
            let keep = 1.0 - lr * cfg.weight_decay;
            p.weight.data_mut().iter_mut().for_each(|w| *w *= keep);
        }
        update(p.weight.data_mut(), g.weight.data(), m.weight.data_mut(), v.weight.data_mut(), cfg, lr_t);
        update(p.bias.data_mut(), g.bias.data(), m.bias.data_mut(), v.bias.data_mut(), cfg, lr_t);
    }
    Ok(())
}
