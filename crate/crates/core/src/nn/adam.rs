use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// First and second moments for every parameter tensor, in `ParamSet` order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

fn tensors(p: &ParamSet) -> impl Iterator<Item = &[f64]> {
    p.iter().flatten().flat_map(|l| [l.weight.data.as_slice(), l.bias.data.as_slice()])
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let m: Vec<Vec<f64>> = tensors(params).map(|t| vec![0.0; t.len()]).collect();
        let v = m.clone();
        Self { config, t: 0, m, v }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }
}

const PAR_MIN: usize = 1 << 16;

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], c: &AdamConfig, bc1: f64, bc2: f64) {
    let body = |(((p, g), m), v): (((&mut f64, &f64), &mut f64), &mut f64)| {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let mh = *m / bc1;
        let vh = *v / bc2;
        *p -= c.lr * mh / (vh.sqrt() + c.eps);
    };
    if p.len() >= PAR_MIN {
        p.par_iter_mut().zip(g.par_iter()).zip(m.par_iter_mut()).zip(v.par_iter_mut()).for_each(body);
    } else {
        p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()).for_each(body);
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape("parameter and gradient layer counts differ".into()));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        match (p, g) {
            (None, None) => {}
            (Some(p), Some(g)) if p.weight.len() == g.weight.len() && p.bias.len() == g.bias.len() => {}
            _ => return Err(Error::Shape(format!("layer {i}: gradient does not match parameters"))),
        }
    }
    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let mut slot = 0;
    for (p, g) in params.iter_mut().zip(grads) {
        if let (Some(p), Some(g)) = (p.as_mut(), g.as_ref()) {
            for (pd, gd) in [(&mut p.weight.data, &g.weight.data), (&mut p.bias.data, &g.bias.data)] {
                let (m, v) = (&mut state.m[slot], &mut state.v[slot]);
                if m.len() != pd.len() {
                    return Err(Error::Shape("optimizer state does not match parameters".into()));
                }
                update(pd, gd, m, v, &c, bc1, bc2);
                slot += 1;
            }
        }
    }
    Ok(())
}
