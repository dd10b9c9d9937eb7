use crate::error::{Error, Result};
use crate::netcore::{NetConfig, NetParams};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: NetParams<f32>,
    pub v: NetParams<f32>,
    pub step: u64,
}

impl OptState {
    pub fn new(cfg: &NetConfig) -> Self {
        OptState {
            m: NetParams::zeros(cfg),
            v: NetParams::zeros(cfg),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut OptState, params: &mut NetParams<f32>, grads: &NetParams<f32>, lr: f64) -> Result<()> {
    let g_named = grads.named();
    let shapes_ok = {
        let p_named = params.named();
        let m_named = state.m.named();
        p_named.len() == g_named.len()
            && p_named.len() == m_named.len()
            && p_named
                .iter()
                .zip(&g_named)
                .zip(&m_named)
                .all(|(((_, p), (_, g)), (_, m))| p.shape == g.shape && p.shape == m.shape)
    };
    if !shapes_ok {
        return Err(Error::Dimension("optimizer, parameter and gradient shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let (b1, b2) = (BETA1 as f32, BETA2 as f32);
    let step_size = (lr / c1) as f32;
    let inv_c2 = (1.0 / c2) as f32;
    let eps = EPSILON as f32;
    let ps = params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, m), v), (_, g)) in ps.into_iter().zip(ms).zip(vs).zip(&g_named) {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
            p.data[i] -= step_size * m.data[i] / ((v.data[i] * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}
