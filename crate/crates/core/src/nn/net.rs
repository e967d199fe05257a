//! Layered convolutional network with explicit forward and backward passes.
//!
//! Activations are batched, example-major, and channel-last (`[B, H, W, C]`
//! for spatial layers, `[B, D]` after flattening). Convolutions use stride 1
//! and "same" zero padding; they are evaluated per example as an im2col
//! product, with examples processed in fixed-size chunks so that gradient
//! reductions happen in the same order whatever the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Examples per gradient partial. Fixed so reductions are reproducible.
const CHUNK: usize = 4;

/// Probability floor inside the log-loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { filters: usize, kernel_h: usize, kernel_w: usize },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }
}

/// conv(32,5x5) x2, dropout(0.25), conv(64,3x3) x2, flatten, dense(256),
/// dropout(0.5), dense(outputs), softmax; ReLU after every conv and the hidden dense layer.
pub fn default_architecture(outputs: usize) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv2d { filters: 32, kernel_h: 5, kernel_w: 5 },
        Relu,
        Conv2d { filters: 32, kernel_h: 5, kernel_w: 5 },
        Relu,
        Dropout { rate: 0.25 },
        Conv2d { filters: 64, kernel_h: 3, kernel_w: 3 },
        Relu,
        Conv2d { filters: 64, kernel_h: 3, kernel_w: 3 },
        Relu,
        Flatten,
        Dense { units: 256 },
        Relu,
        Dropout { rate: 0.5 },
        Dense { units: outputs },
        Softmax,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Per-layer parameter (or gradient) storage; `None` for parameter-free layers.
pub type ParamSet = Vec<Option<LayerParams>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Inference,
    /// Dropout active; masks drawn from streams keyed by this seed.
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    pub acts: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    /// Softmax outputs, `batch x classes`.
    pub fn probs(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sign pattern of every ReLU output, used to detect kinks in finite differences.
    pub fn relu_signature(&self, net: &ConvNet) -> Vec<bool> {
        net.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Relu))
            .flat_map(|(i, _)| self.acts[i + 1].iter().map(|&v| v > 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNet {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    /// Output shape of each layer, per example.
    shapes: Vec<Vec<usize>>,
    params: ParamSet,
    pub l1_lambda: f64,
}

#[derive(Clone, Copy)]
struct ConvGeom {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.kh * self.kw * self.cin
    }
    fn hw(&self) -> usize {
        self.h * self.w
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + n - 1 < c.len());
    // SAFETY: the asserts above keep every accessed element inside the slices,
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

fn im2col(g: &ConvGeom, x: &[f64], col: &mut [f64]) {
    let (ph, pw) = ((g.kh - 1) / 2, (g.kw - 1) / 2);
    let k = g.k();
    for y in 0..g.h {
        for xx in 0..g.w {
            let row = &mut col[(y * g.w + xx) * k..(y * g.w + xx + 1) * k];
            for dy in 0..g.kh {
                let sy = y as isize + dy as isize - ph as isize;
                for dx in 0..g.kw {
                    let sx = xx as isize + dx as isize - pw as isize;
                    let dst = &mut row[(dy * g.kw + dx) * g.cin..(dy * g.kw + dx + 1) * g.cin];
                    if sy < 0 || sy >= g.h as isize || sx < 0 || sx >= g.w as isize {
                        dst.fill(0.0);
                    } else {
                        let src = (sy as usize * g.w + sx as usize) * g.cin;
                        dst.copy_from_slice(&x[src..src + g.cin]);
                    }
                }
            }
        }
    }
}

fn col2im_add(g: &ConvGeom, dcol: &[f64], dx: &mut [f64]) {
    let (ph, pw) = ((g.kh - 1) / 2, (g.kw - 1) / 2);
    let k = g.k();
    for y in 0..g.h {
        for xx in 0..g.w {
            let row = &dcol[(y * g.w + xx) * k..(y * g.w + xx + 1) * k];
            for dy in 0..g.kh {
                let sy = y as isize + dy as isize - ph as isize;
                if sy < 0 || sy >= g.h as isize {
                    continue;
                }
                for dxo in 0..g.kw {
                    let sx = xx as isize + dxo as isize - pw as isize;
                    if sx < 0 || sx >= g.w as isize {
                        continue;
                    }
                    let src = &row[(dy * g.kw + dxo) * g.cin..(dy * g.kw + dxo + 1) * g.cin];
                    let dst = (sy as usize * g.w + sx as usize) * g.cin;
                    for (d, s) in dx[dst..dst + g.cin].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (src, dst) in logits.chunks(classes).zip(out.chunks_mut(classes)) {
        let mx = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - mx).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
}

/// Softmax of a single logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    softmax_rows(logits, logits.len().max(1))
}

fn dropout_mask(seed: u64, layer: usize, example: usize, len: usize, rate: f64) -> Vec<f64> {
    let mut r = rng::substream(seed, "dropout", ((layer as u64) << 40) | example as u64);
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..len).map(|_| if r.random::<f64>() < keep { scale } else { 0.0 }).collect()
}

impl ConvNet {
    /// Builds a network for `[rows, cols, channels]` inputs with seeded initial weights
    /// (He-uniform before ReLU, Glorot-uniform otherwise; zero biases).
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, l1_lambda: f64, seed: u64) -> Result<Self> {
        if !(l1_lambda >= 0.0) {
            return Err(Error::Validation(format!("l1_lambda must be non-negative, got {l1_lambda}")));
        }
        if input_shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("input shape {input_shape:?} has a zero dimension")));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut cur: Vec<usize> = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            cur = match *layer {
                LayerSpec::Conv2d { filters, kernel_h, kernel_w } => {
                    if cur.len() != 3 {
                        return Err(Error::Shape(format!("layer {i}: conv2d needs a spatial input, got {cur:?}")));
                    }
                    if filters == 0 || kernel_h % 2 == 0 || kernel_w % 2 == 0 {
                        return Err(Error::Shape(format!(
                            "layer {i}: conv2d needs filters > 0 and odd kernel sizes, got {filters} {kernel_h}x{kernel_w}"
                        )));
                    }
                    vec![cur[0], cur[1], filters]
                }
                LayerSpec::Relu => cur,
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Validation(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                    cur
                }
                LayerSpec::Flatten => vec![cur.iter().product()],
                LayerSpec::Dense { units } => {
                    if cur.len() != 1 || units == 0 {
                        return Err(Error::Shape(format!("layer {i}: dense needs a flat input, got {cur:?}")));
                    }
                    vec![units]
                }
                LayerSpec::Softmax => {
                    if cur.len() != 1 || i + 1 != layers.len() {
                        return Err(Error::Shape(format!("layer {i}: softmax must be terminal and flat")));
                    }
                    cur
                }
            };
            shapes.push(cur.clone());
        }
        if !matches!(layers.last(), Some(LayerSpec::Softmax)) {
            return Err(Error::Shape("network must end in a softmax layer".into()));
        }

        let mut params = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let input = if i == 0 { input_shape.to_vec() } else { shapes[i - 1].clone() };
            let before_relu = layers[i + 1..]
                .iter()
                .find(|l| !matches!(l, LayerSpec::Dropout { .. }))
                .is_some_and(|l| matches!(l, LayerSpec::Relu));
            let mut r = rng::substream(seed, "init", i as u64);
            let mut init = |fan_in: usize, fan_out: usize, shape: &[usize]| {
                let limit = if before_relu {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                let n: usize = shape.iter().product();
                let data = (0..n).map(|_| (2.0 * r.random::<f64>() - 1.0) * limit).collect();
                Tensor { shape: shape.to_vec(), data }
            };
            params.push(match *layer {
                LayerSpec::Conv2d { filters, kernel_h, kernel_w } => {
                    let cin = input[2];
                    let fan_in = kernel_h * kernel_w * cin;
                    Some(LayerParams {
                        weight: init(fan_in, kernel_h * kernel_w * filters, &[kernel_h, kernel_w, cin, filters]),
                        bias: Tensor::zeros(&[filters]),
                    })
                }
                LayerSpec::Dense { units } => Some(LayerParams {
                    weight: init(input[0], units, &[input[0], units]),
                    bias: Tensor::zeros(&[units]),
                }),
                _ => None,
            });
        }
        Ok(Self { input_shape, layers, shapes, params, l1_lambda })
    }

    /// The default architecture for `rows x cols` single-channel inputs and five outputs.
    pub fn standard(rows: usize, cols: usize, l1_lambda: f64, seed: u64) -> Result<Self> {
        Self::new([rows, cols, 1], default_architecture(5), l1_lambda, seed)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().map_or(0, |s| s[0])
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    /// Replaces all parameters; shapes must match the architecture.
    pub fn set_params(&mut self, params: ParamSet) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!("{} parameter slots for {} layers", params.len(), self.params.len())));
        }
        for (i, (new, old)) in params.iter().zip(&self.params).enumerate() {
            match (new, old) {
                (None, None) => {}
                (Some(a), Some(b)) if a.weight.shape == b.weight.shape && a.bias.shape == b.bias.shape => {
                    if a.weight.data.len() != b.weight.data.len() || a.bias.data.len() != b.bias.data.len() {
                        return Err(Error::Shape(format!("layer {i}: parameter length mismatch")));
                    }
                }
                _ => return Err(Error::Shape(format!("layer {i}: parameter shape mismatch"))),
            }
        }
        self.params = params;
        Ok(())
    }

    /// Zero-filled tensors shaped like the parameters.
    pub fn zero_grads(&self) -> ParamSet {
        self.params
            .iter()
            .map(|p| {
                p.as_ref().map(|p| LayerParams { weight: Tensor::zeros(&p.weight.shape), bias: Tensor::zeros(&p.bias.shape) })
            })
            .collect()
    }

    fn layer_input_shape(&self, i: usize) -> &[usize] {
        if i == 0 {
            &self.input_shape
        } else {
            &self.shapes[i - 1]
        }
    }

    fn conv_geom(&self, i: usize) -> ConvGeom {
        let s = self.layer_input_shape(i);
        match self.layers[i] {
            LayerSpec::Conv2d { filters, kernel_h, kernel_w } => {
                ConvGeom { h: s[0], w: s[1], cin: s[2], cout: filters, kh: kernel_h, kw: kernel_w }
            }
            _ => unreachable!("layer {i} is not a convolution"),
        }
    }

    /// Forward pass over `batch` examples stored contiguously in `inputs`.
    pub fn forward(&self, inputs: &[f64], batch: usize, mode: Mode) -> Result<ForwardCache> {
        let per = self.input_len();
        if batch == 0 || inputs.len() != per * batch {
            return Err(Error::Shape(format!(
                "expected {batch} inputs of shape {:?} ({} values), got {} values",
                self.input_shape,
                per * batch,
                inputs.len()
            )));
        }
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        acts.push(inputs.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = &acts[i];
            let mut mask = None;
            let y = match *layer {
                LayerSpec::Conv2d { .. } => {
                    let g = self.conv_geom(i);
                    let p = self.params[i].as_ref().expect("conv params");
                    let (hw, k) = (g.hw(), g.k());
                    let mut out = vec![0.0; batch * hw * g.cout];
                    out.par_chunks_mut(hw * g.cout).zip(x.par_chunks(hw * g.cin)).for_each_init(
                        || vec![0.0; hw * k],
                        |col, (o, xin)| {
                            im2col(&g, xin, col);
                            for r in o.chunks_mut(g.cout) {
                                r.copy_from_slice(&p.bias.data);
                            }
                            gemm(hw, k, g.cout, 1.0, col, k, 1, &p.weight.data, g.cout, 1, 1.0, o, g.cout);
                        },
                    );
                    out
                }
                LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Train { dropout_seed } if rate > 0.0 => {
                        let len = x.len() / batch;
                        let m: Vec<f64> = (0..batch)
                            .into_par_iter()
                            .flat_map_iter(|b| dropout_mask(dropout_seed, i, b, len, rate))
                            .collect();
                        let y = x.iter().zip(&m).map(|(a, b)| a * b).collect();
                        mask = Some(m);
                        y
                    }
                    _ => x.clone(),
                },
                LayerSpec::Flatten => x.clone(),
                LayerSpec::Dense { units } => {
                    let fan_in = self.layer_input_shape(i)[0];
                    let p = self.params[i].as_ref().expect("dense params");
                    let mut out = vec![0.0; batch * units];
                    for r in out.chunks_mut(units) {
                        r.copy_from_slice(&p.bias.data);
                    }
                    gemm(batch, fan_in, units, 1.0, x, fan_in, 1, &p.weight.data, units, 1, 1.0, &mut out, units);
                    out
                }
                LayerSpec::Softmax => softmax_rows(x, self.shapes[i][0]),
            };
            if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical { layer: i, detail: format!("activation {bad} is {}", y[bad]) });
            }
            masks.push(mask);
            acts.push(y);
        }
        Ok(ForwardCache { batch, acts, masks })
    }

    /// Class probabilities for one input in inference mode.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input, 1, Mode::Inference)?.probs().to_vec())
    }

    /// Mean cross-entropy against class indices plus the L1 weight penalty.
    pub fn loss_from_probs(&self, probs: &[f64], targets: &[usize]) -> f64 {
        let k = self.num_classes();
        let ce: f64 = targets
            .iter()
            .enumerate()
            .map(|(b, &t)| -probs[b * k + t].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).ln())
            .sum::<f64>()
            / targets.len() as f64;
        ce + self.l1_lambda * self.l1_norm()
    }

    /// Sum of absolute weights (biases excluded).
    pub fn l1_norm(&self) -> f64 {
        self.params.iter().flatten().map(|p| p.weight.data.iter().map(|w| w.abs()).sum::<f64>()).sum()
    }

    fn check_targets(&self, batch: usize, targets: &[usize]) -> Result<()> {
        if targets.len() != batch || batch == 0 {
            return Err(Error::Shape(format!("{} targets for a batch of {batch}", targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= self.num_classes()) {
            return Err(Error::Validation(format!("target class {t} out of range")));
        }
        Ok(())
    }

    /// Loss only (no gradients).
    pub fn loss(&self, inputs: &[f64], targets: &[usize], mode: Mode) -> Result<f64> {
        self.check_targets(targets.len(), targets)?;
        let cache = self.forward(inputs, targets.len(), mode)?;
        Ok(self.loss_from_probs(cache.probs(), targets))
    }

    /// Loss and gradients for a batch. `targets` are class indices (one-hot rows).
    pub fn loss_and_grads(&self, inputs: &[f64], targets: &[usize], mode: Mode) -> Result<(f64, ParamSet, ForwardCache)> {
        let batch = targets.len();
        self.check_targets(batch, targets)?;
        let cache = self.forward(inputs, batch, mode)?;
        let loss = self.loss_from_probs(cache.probs(), targets);
        let k = self.num_classes();
        let mut d: Vec<f64> = cache.probs().to_vec();
        for (b, &t) in targets.iter().enumerate() {
            d[b * k + t] -= 1.0;
        }
        let inv = 1.0 / batch as f64;
        d.iter_mut().for_each(|v| *v *= inv);
        let grads = self.backward(&cache, d)?;
        Ok((loss, grads, cache))
    }

    /// Backpropagates `dlogits` (gradient with respect to the softmax input).
    fn backward(&self, cache: &ForwardCache, dlogits: Vec<f64>) -> Result<ParamSet> {
        let batch = cache.batch;
        let mut grads = self.zero_grads();
        let mut grad = dlogits;
        let last = self.layers.len() - 1;
        for i in (0..last).rev() {
            let x = &cache.acts[i];
            let need_dx = i > 0;
            grad = match self.layers[i] {
                LayerSpec::Relu => {
                    let y = &cache.acts[i + 1];
                    grad.iter().zip(y).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect()
                }
                LayerSpec::Dropout { .. } => match &cache.masks[i] {
                    Some(m) => grad.iter().zip(m).map(|(g, s)| g * s).collect(),
                    None => grad,
                },
                LayerSpec::Flatten => grad,
                LayerSpec::Dense { units } => {
                    let fan_in = self.layer_input_shape(i)[0];
                    let p = self.params[i].as_ref().expect("dense params");
                    let gp = grads[i].as_mut().expect("dense grads");
                    gemm(fan_in, batch, units, 1.0, x, 1, fan_in, &grad, units, 1, 0.0, &mut gp.weight.data, units);
                    for r in grad.chunks(units) {
                        for (b, g) in gp.bias.data.iter_mut().zip(r) {
                            *b += g;
                        }
                    }
                    if need_dx {
                        let mut dx = vec![0.0; batch * fan_in];
                        gemm(batch, units, fan_in, 1.0, &grad, units, 1, &p.weight.data, 1, units, 0.0, &mut dx, fan_in);
                        dx
                    } else {
                        Vec::new()
                    }
                }
                LayerSpec::Conv2d { .. } => {
                    let g = self.conv_geom(i);
                    let p = self.params[i].as_ref().expect("conv params");
                    let (dw, db, dx) = conv_backward(&g, batch, x, &grad, &p.weight.data, need_dx);
                    let gp = grads[i].as_mut().expect("conv grads");
                    gp.weight.data = dw;
                    gp.bias.data = db;
                    dx
                }
                LayerSpec::Softmax => unreachable!("softmax is terminal"),
            };
        }
        if self.l1_lambda > 0.0 {
            for (g, p) in grads.iter_mut().zip(&self.params) {
                if let (Some(g), Some(p)) = (g.as_mut(), p.as_ref()) {
                    for (gw, &w) in g.weight.data.iter_mut().zip(&p.weight.data) {
                        if w != 0.0 {
                            *gw += self.l1_lambda * w.signum();
                        }
                    }
                }
            }
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.weight.is_finite() || !g.bias.is_finite() {
                    return Err(Error::Numerical { layer: i, detail: "non-finite gradient".into() });
                }
            }
        }
        Ok(grads)
    }
}

fn conv_backward(
    g: &ConvGeom,
    batch: usize,
    x: &[f64],
    dy: &[f64],
    w: &[f64],
    need_dx: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (hw, k) = (g.hw(), g.k());
    let in_len = hw * g.cin;
    let out_len = hw * g.cout;
    let chunks = batch.div_ceil(CHUNK);
    let work = |c: usize, dx_chunk: Option<&mut [f64]>| {
        let mut dw = vec![0.0; k * g.cout];
        let mut db = vec![0.0; g.cout];
        let mut col = vec![0.0; hw * k];
        let mut dcol = if dx_chunk.is_some() { vec![0.0; hw * k] } else { Vec::new() };
        let mut dx_chunk = dx_chunk;
        for b in c * CHUNK..((c + 1) * CHUNK).min(batch) {
            let xin = &x[b * in_len..(b + 1) * in_len];
            let dout = &dy[b * out_len..(b + 1) * out_len];
            im2col(g, xin, &mut col);
            gemm(k, hw, g.cout, 1.0, &col, 1, k, dout, g.cout, 1, 1.0, &mut dw, g.cout);
            for r in dout.chunks(g.cout) {
                for (d, v) in db.iter_mut().zip(r) {
                    *d += v;
                }
            }
            if let Some(dxc) = dx_chunk.as_deref_mut() {
                gemm(hw, g.cout, k, 1.0, dout, g.cout, 1, w, 1, g.cout, 0.0, &mut dcol, k);
                let off = (b - c * CHUNK) * in_len;
                col2im_add(g, &dcol, &mut dxc[off..off + in_len]);
            }
        }
        (dw, db)
    };
    let mut dx = if need_dx { vec![0.0; batch * in_len] } else { Vec::new() };
    let partials: Vec<(Vec<f64>, Vec<f64>)> = if need_dx {
        dx.par_chunks_mut(CHUNK * in_len).enumerate().map(|(c, d)| work(c, Some(d))).collect()
    } else {
        (0..chunks).into_par_iter().map(|c| work(c, None)).collect()
    };
    let mut dw = vec![0.0; k * g.cout];
    let mut db = vec![0.0; g.cout];
    for (pw, pb) in partials {
        for (a, b) in dw.iter_mut().zip(&pw) {
            *a += b;
        }
        for (a, b) in db.iter_mut().zip(&pb) {
            *a += b;
        }
    }
    (dw, db, dx)
}
