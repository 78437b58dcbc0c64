use crate::error::{Error, Result};
use crate::net::network::Network;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Network,
    pub v: Network,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape_of: &Network) -> Self {
        Self {
            m: shape_of.zeros_like(),
            v: shape_of.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness before
/// anything is modified.
pub fn adam_step(params: &mut Network, grads: &Network, state: &mut AdamState, lr: f64) -> Result<()> {
    for (name, g) in grads.tensors() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { param: name });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    let p_all = params.tensors_mut();
    for (((( _, p), (_, g)), (_, m)), (_, v)) in p_all.into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
