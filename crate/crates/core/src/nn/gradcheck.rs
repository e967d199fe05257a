//! Central finite-difference check of the analytic gradients.
//!
//! The numeric side uses the forward pass only, with dropout masks frozen by
//! reusing one dropout seed. Entries whose perturbation flips a ReLU (or the
//! sign of a weight under L1) are non-differentiable at that step size and
//! are counted separately instead of compared.

use rand::seq::index::sample;

use super::net::{ConvNet, Mode};
use crate::error::Result;
use crate::rng;

/// Denominator floor for the relative error `|a - n| / max(|a|, |n|, floor)`.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// (layer, is_bias, index) of the worst entry.
    pub worst: Option<(usize, bool, usize)>,
}

pub struct GradCheckConfig {
    pub step: f64,
    /// Entries sampled per tensor; `None` checks every entry.
    pub per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, per_tensor: None, seed: 0 }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

pub fn check_gradients(
    net: &mut ConvNet,
    inputs: &[f64],
    targets: &[usize],
    dropout_seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mode = Mode::Train { dropout_seed };
    let (_, grads, cache) = net.loss_and_grads(inputs, targets, mode)?;
    let base_sig = cache.relu_signature(net);
    let mut report = GradCheckReport { checked: 0, skipped_kinks: 0, max_rel_error: 0.0, worst: None };
    let h = cfg.step;
    let l1 = net.l1_lambda > 0.0;

    for layer in 0..net.params().len() {
        if net.params()[layer].is_none() {
            continue;
        }
        for is_bias in [false, true] {
            let len = {
                let p = net.params()[layer].as_ref().expect("params");
                if is_bias { p.bias.len() } else { p.weight.len() }
            };
            let idx: Vec<usize> = match cfg.per_tensor {
                Some(k) if k < len => {
                    let mut r = rng::substream(cfg.seed, "gradcheck", (layer as u64) << 1 | is_bias as u64);
                    let mut v = sample(&mut r, len, k).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..len).collect(),
            };
            for i in idx {
                let orig = *slot(net, layer, is_bias, i);
                if l1 && !is_bias && orig.abs() <= h {
                    report.skipped_kinks += 1;
                    continue;
                }
                *slot(net, layer, is_bias, i) = orig + h;
                let plus = eval(net, inputs, targets, mode);
                *slot(net, layer, is_bias, i) = orig - h;
                let minus = eval(net, inputs, targets, mode);
                *slot(net, layer, is_bias, i) = orig;
                let ((lp, sp), (lm, sm)) = (plus?, minus?);
                if sp != base_sig || sm != base_sig {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (lp - lm) / (2.0 * h);
                let g = grads[layer].as_ref().expect("grads");
                let analytic = if is_bias { g.bias.data[i] } else { g.weight.data[i] };
                let err = relative_error(analytic, numeric);
                report.checked += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = Some((layer, is_bias, i));
                }
            }
        }
    }
    Ok(report)
}

fn slot(net: &mut ConvNet, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
    let p = net.params_mut()[layer].as_mut().expect("params");
    if is_bias {
        &mut p.bias.data[i]
    } else {
        &mut p.weight.data[i]
    }
}

fn eval(net: &ConvNet, inputs: &[f64], targets: &[usize], mode: Mode) -> Result<(f64, Vec<bool>)> {
    let c = net.forward(inputs, targets.len(), mode)?;
    Ok((net.loss_from_probs(c.probs(), targets), c.relu_signature(net)))
}
