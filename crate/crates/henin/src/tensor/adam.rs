//! Bias-corrected Adam update over a named parameter store.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::{HeninError, Result};

use super::{GradMap, ModelParams};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first_moment: BTreeMap<String, Array2<f64>>,
    second_moment: BTreeMap<String, Array2<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }
}

/// One Adam step. `grads` must cover exactly the names it wants updated;
/// parameters without a gradient entry are left untouched.
pub fn adam_step(params: &mut ModelParams, grads: &GradMap, state: &mut AdamState) -> Result<()> {
    state.step += 1;
    let t = state.step as f64;
    let cfg = state.config;
    let bias1 = 1.0 - cfg.beta1.powf(t);
    let bias2 = 1.0 - cfg.beta2.powf(t);
    for (name, grad) in grads {
        let param = params.get_mut(name)?;
        if param.dim() != grad.dim() {
            return Err(HeninError::ShapeMismatch {
                name: name.clone(),
                expected: format!("{:?}", param.dim()),
                got: format!("{:?}", grad.dim()),
            });
        }
        let m = state
            .first_moment
            .entry(name.clone())
            .or_insert_with(|| Array2::zeros(param.raw_dim()));
        let v = state
            .second_moment
            .entry(name.clone())
            .or_insert_with(|| Array2::zeros(param.raw_dim()));
        m.zip_mut_with(grad, |m, &g| *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g);
        v.zip_mut_with(grad, |v, &g| *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g);
        ndarray::Zip::from(&mut *param)
            .and(&*m)
            .and(&*v)
            .for_each(|p, &m, &v| {
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            });
    }
    Ok(())
}
