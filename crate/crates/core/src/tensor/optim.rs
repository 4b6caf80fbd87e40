//! Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| {
                (
                    Matrix::zeros(p.rows(), p.cols()),
                    Matrix::zeros(p.rows(), p.cols()),
                )
            })
            .unzip();
        Self { step: 0, m, v }
    }
}

/// One bias-corrected Adam update. A missing gradient counts as zero.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Option<&Matrix>],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        if m.shape() != p.shape() {
            return Err(Error::Shape(format!("adam: parameter {i} changed shape")));
        }
        let g = grads[i];
        if let Some(g) = g {
            if g.shape() != p.shape() {
                return Err(Error::Shape(format!(
                    "adam: gradient {:?} for parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }
        let ps = p.as_mut_slice();
        let ms = m.as_mut_slice();
        let vs = v.as_mut_slice();
        for j in 0..ps.len() {
            let gj = g.map_or(0.0, |g| g.as_slice()[j]);
            ms[j] = config.beta1 * ms[j] + (1.0 - config.beta1) * gj;
            vs[j] = config.beta2 * vs[j] + (1.0 - config.beta2) * gj * gj;
            let m_hat = ms[j] / bc1;
            let v_hat = vs[j] / bc2;
            ps[j] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}
