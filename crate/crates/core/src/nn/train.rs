use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::net::{ConvNet, Mode};
use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    /// Batch of 1000 datasets for 10 epochs.
    pub fn full_scale(seed: u64) -> Self {
        Self { batch_size: 1000, epochs: 10, seed, adam: AdamConfig::default() }
    }

    /// Small batches so a few thousand datasets still give enough optimizer steps.
    pub fn desk(seed: u64) -> Self {
        Self { batch_size: 32, epochs: 10, seed, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Training examples: flattened inputs and class indices.
pub struct Examples<'a> {
    pub inputs: &'a [Vec<f64>],
    pub targets: &'a [usize],
}

/// Mini-batch Adam training. Shuffling and dropout streams derive from
/// `config.seed`; the same seed gives bit-identical parameters.
pub fn train(net: &mut ConvNet, data: Examples<'_>, config: &TrainConfig) -> Result<Vec<EpochStats>> {
    train_with_callback(net, data, config, |_| {})
}

pub fn train_with_callback(
    net: &mut ConvNet,
    data: Examples<'_>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    let n = data.inputs.len();
    if n == 0 {
        return invalid("training corpus is empty");
    }
    if data.targets.len() != n {
        return invalid(format!("{} targets for {n} inputs", data.targets.len()));
    }
    if config.batch_size == 0 || config.batch_size > n {
        return invalid(format!("batch size {} must lie in [1, {n}]", config.batch_size));
    }
    let per = net.input_len();
    if let Some(i) = data.inputs.iter().position(|x| x.len() != per) {
        return invalid(format!("input {i} has {} values, expected {per}", data.inputs[i].len()));
    }
    let classes = net.num_classes();
    let mut state = AdamState::new(net.params(), config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let dropout_base = rng::derive_seed(config.seed, "train-dropout");
    let mut step: u64 = 0;
    let mut batch_inputs = Vec::with_capacity(config.batch_size * per);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::substream(config.seed, "train-shuffle", epoch as u64));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            batch_inputs.clear();
            for &i in idx {
                batch_inputs.extend_from_slice(&data.inputs[i]);
            }
            let targets: Vec<usize> = idx.iter().map(|&i| data.targets[i]).collect();
            let mode = Mode::Train { dropout_seed: rng::mix64(dropout_base.wrapping_add(step)) };
            let (loss, grads, cache) = net.loss_and_grads(&batch_inputs, &targets, mode)?;
            let probs = cache.probs();
            for (b, &t) in targets.iter().enumerate() {
                let row = &probs[b * classes..(b + 1) * classes];
                if argmax(row) == t {
                    correct += 1;
                }
            }
            loss_sum += loss * idx.len() as f64;
            adam_step(net.params_mut(), &grads, &mut state)?;
            step += 1;
        }
        let stats = EpochStats { epoch, loss: loss_sum / n as f64, accuracy: correct as f64 / n as f64 };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
