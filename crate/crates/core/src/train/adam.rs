use crate::model::{Gradients, ModelParams};
use crate::numcore::ParameterSet;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one buffer per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.parameters().iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let g = grads.buffers();
    if g.len() != state.m.len() {
        return Err(Error::dim("gradient and optimizer state do not match the parameters"));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (k, p) in params.parameters_mut().into_iter().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], &g[k]);
        if m.len() != p.value.len() || g.len() != m.len() {
            return Err(Error::dim(format!(
                "optimizer state for `{}` has the wrong size",
                p.name
            )));
        }
        for (i, theta) in p.value.data_mut().iter_mut().enumerate() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
