use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::rng;
use rand::Rng;

fn random_inputs(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::substream(seed, "test-inputs", 0);
    (0..len).map(|_| 2.0 * r.random::<f64>() - 1.0).collect()
}

fn small_net(layers: Vec<LayerSpec>, shape: [usize; 3], l1: f64, seed: u64) -> ConvNet {
    ConvNet::new(shape, layers, l1, seed).unwrap()
}

#[test]
fn zero_parameters_give_uniform_probs() {
    let mut net = ConvNet::standard(8, 7, 0.0, 1).unwrap();
    for p in net.params_mut().iter_mut().flatten() {
        p.weight.fill(0.0);
        p.bias.fill(0.0);
    }
    let probs = net.predict(&random_inputs(56, 2)).unwrap();
    assert_eq!(probs.len(), 5);
    for p in probs {
        assert!((p - 0.2).abs() < 1e-15);
    }
    let loss = net.loss(&random_inputs(56, 2), &[3], Mode::Inference).unwrap();
    assert!((loss - 5f64.ln()).abs() < 1e-12);
    assert!((5f64.ln() - 1.60944).abs() < 1e-5);
}

#[test]
fn perfect_prediction_loss_hits_floor() {
    let net = small_net(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 2 }, LayerSpec::Softmax], [1, 1, 1], 0.0, 0);
    let probs = [1.0, 0.0];
    let loss = net.loss_from_probs(&probs, &[0]);
    assert!(loss >= 0.0 && loss < 1e-11);
    let worst = net.loss_from_probs(&probs, &[1]);
    assert!((worst + (1e-12f64).ln()).abs() < 1e-9);
}

#[test]
fn dropout_rate_zero_matches_inference() {
    let layers = vec![
        LayerSpec::Conv2d { filters: 3, kernel_h: 3, kernel_w: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.0 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 4 },
        LayerSpec::Dropout { rate: 0.0 },
        LayerSpec::Dense { units: 5 },
        LayerSpec::Softmax,
    ];
    let net = small_net(layers, [5, 4, 1], 0.0, 3);
    let x = random_inputs(40, 4);
    let a = net.forward(&x, 2, Mode::Train { dropout_seed: 9 }).unwrap();
    let b = net.forward(&x, 2, Mode::Inference).unwrap();
    assert_eq!(a.probs(), b.probs());
}

#[test]
fn identity_kernel_reproduces_input() {
    let layers = vec![
        LayerSpec::Conv2d { filters: 1, kernel_h: 1, kernel_w: 1 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 2 },
        LayerSpec::Softmax,
    ];
    let mut net = small_net(layers, [3, 3, 1], 0.0, 0);
    let p = net.params_mut()[0].as_mut().unwrap();
    p.weight.data[0] = 1.0;
    p.bias.data[0] = 0.0;
    let x: Vec<f64> = (1..=9).map(f64::from).collect();
    let c = net.forward(&x, 1, Mode::Inference).unwrap();
    assert_eq!(c.acts[1], x);
}

#[test]
fn same_padding_3x3_matches_direct_sum() {
    let layers = vec![
        LayerSpec::Conv2d { filters: 2, kernel_h: 3, kernel_w: 3 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 2 },
        LayerSpec::Softmax,
    ];
    let net = small_net(layers, [4, 5, 1], 0.0, 11);
    let x = random_inputs(20, 12);
    let c = net.forward(&x, 1, Mode::Inference).unwrap();
    let p = net.params()[0].as_ref().unwrap();
    for y in 0..4i32 {
        for xx in 0..5i32 {
            for f in 0..2 {
                let mut s = p.bias.data[f];
                for dy in 0..3i32 {
                    for dx in 0..3i32 {
                        let (sy, sx) = (y + dy - 1, xx + dx - 1);
                        if (0..4).contains(&sy) && (0..5).contains(&sx) {
                            s += x[(sy * 5 + sx) as usize] * p.weight.data[((dy * 3 + dx) * 2) as usize + f];
                        }
                    }
                }
                let got = c.acts[1][((y * 5 + xx) * 2) as usize + f];
                assert!((got - s).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn shape_errors() {
    let net = ConvNet::standard(8, 7, 0.0, 0).unwrap();
    assert!(matches!(net.forward(&[0.0; 55], 1, Mode::Inference), Err(Error::Shape(_))));
    assert!(ConvNet::new([4, 4, 1], vec![LayerSpec::Dense { units: 3 }, LayerSpec::Softmax], 0.0, 0).is_err());
    assert!(ConvNet::new([4, 4, 1], vec![LayerSpec::Flatten, LayerSpec::Dense { units: 3 }], 0.0, 0).is_err());
    assert!(ConvNet::new([4, 4, 1], vec![LayerSpec::Conv2d { filters: 2, kernel_h: 2, kernel_w: 3 }, LayerSpec::Flatten, LayerSpec::Softmax], 0.0, 0).is_err());
    assert!(ConvNet::new([4, 4, 1], vec![LayerSpec::Flatten, LayerSpec::Dropout { rate: 1.0 }, LayerSpec::Softmax], 0.0, 0).is_err());
}

#[test]
fn non_finite_activation_reports_layer() {
    let mut net = small_net(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 3 }, LayerSpec::Softmax], [1, 2, 1], 0.0, 0);
    net.params_mut()[1].as_mut().unwrap().weight.data[0] = f64::INFINITY;
    match net.forward(&[1.0, 1.0], 1, Mode::Inference) {
        Err(Error::Numerical { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("expected numerical error, got {other:?}"),
    }
}

#[test]
fn dropout_is_unbiased_in_expectation() {
    let layers = vec![
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 6 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { units: 5 },
        LayerSpec::Softmax,
    ];
    let net = small_net(layers, [1, 4, 1], 0.0, 21);
    let x = random_inputs(4, 22);
    let pre = 5; // output of the second dense layer
    let reference = net.forward(&x, 1, Mode::Inference).unwrap().acts[pre].clone();
    let n = 10_000;
    let mut sum = vec![0.0; 5];
    let mut sq = vec![0.0; 5];
    for s in 0..n {
        let c = net.forward(&x, 1, Mode::Train { dropout_seed: s }).unwrap();
        for (k, v) in c.acts[pre].iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    for k in 0..5 {
        let mean = sum[k] / n as f64;
        let var = sq[k] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - reference[k]).abs() <= 3.0 * se + 1e-12, "unit {k}: {mean} vs {}", reference[k]);
    }
}

#[test]
fn training_zero_epochs_is_identity() {
    let mut net = small_net(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 5 }, LayerSpec::Softmax], [2, 2, 1], 0.0, 0);
    let before = net.clone();
    let inputs = vec![random_inputs(4, 1), random_inputs(4, 2)];
    let cfg = TrainConfig { epochs: 0, batch_size: 1, ..TrainConfig::desk(0) };
    let h = train(&mut net, Examples { inputs: &inputs, targets: &[0, 1] }, &cfg).unwrap();
    assert!(h.is_empty());
    assert_eq!(net, before);
}

#[test]
fn training_validates_inputs() {
    let mut net = small_net(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 5 }, LayerSpec::Softmax], [2, 2, 1], 0.0, 0);
    let cfg = TrainConfig { batch_size: 1, ..TrainConfig::desk(0) };
    assert!(train(&mut net, Examples { inputs: &[], targets: &[] }, &cfg).is_err());
    let inputs = vec![random_inputs(4, 1)];
    let big = TrainConfig { batch_size: 2, ..cfg.clone() };
    assert!(train(&mut net, Examples { inputs: &inputs, targets: &[0] }, &big).is_err());
}

fn toy_problem() -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..60 {
        let t = i % 3;
        let mut x = random_inputs(12, 100 + i as u64);
        for v in x.iter_mut().skip(t * 4).take(4) {
            *v += 2.0;
        }
        inputs.push(x);
        targets.push(t);
    }
    (inputs, targets)
}

#[test]
fn training_is_deterministic_and_learns() {
    let layers = vec![
        LayerSpec::Conv2d { filters: 4, kernel_h: 3, kernel_w: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 16 },
        LayerSpec::Relu,
        LayerSpec::Dense { units: 3 },
        LayerSpec::Softmax,
    ];
    let (inputs, targets) = toy_problem();
    let cfg = TrainConfig { batch_size: 8, epochs: 30, seed: 5, adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() } };
    let run = || {
        let mut net = small_net(layers.clone(), [3, 4, 1], 1e-5, 3);
        let h = train(&mut net, Examples { inputs: &inputs, targets: &targets }, &cfg).unwrap();
        (net, h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.params(), b.params());
    assert_eq!(ha, hb);
    assert_eq!(ha.len(), 30);
    assert!(ha.last().unwrap().accuracy > 0.9, "{:?}", ha.last());
    assert!(ha.last().unwrap().loss < ha[0].loss);
}

fn assert_gradients(mut net: ConvNet, batch: usize, per_tensor: Option<usize>, seed: u64) {
    let x = random_inputs(net.input_len() * batch, seed);
    let targets: Vec<usize> = (0..batch).map(|b| (b + seed as usize) % net.num_classes()).collect();
    let cfg = GradCheckConfig { per_tensor, seed, ..GradCheckConfig::default() };
    let report = check_gradients(&mut net, &x, &targets, seed ^ 0xabc, &cfg).unwrap();
    assert!(report.checked > 0);
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn gradients_dense_only() {
    let layers = vec![LayerSpec::Flatten, LayerSpec::Dense { units: 4 }, LayerSpec::Relu, LayerSpec::Dense { units: 5 }, LayerSpec::Softmax];
    assert_gradients(small_net(layers, [2, 3, 1], 1e-3, 1), 3, None, 1);
}

#[test]
fn gradients_conv_stack_with_dropout() {
    let layers = vec![
        LayerSpec::Conv2d { filters: 3, kernel_h: 5, kernel_w: 5 },
        LayerSpec::Relu,
        LayerSpec::Conv2d { filters: 2, kernel_h: 3, kernel_w: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 6 },
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { units: 5 },
        LayerSpec::Softmax,
    ];
    assert_gradients(small_net(layers, [8, 7, 1], 1e-4, 2), 2, None, 2);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, .. ProptestConfig::default() })]

    #[test]
    fn gradients_random_small_configs(
        h in 3usize..7,
        w in 3usize..6,
        f1 in 1usize..4,
        k1 in prop::sample::select(vec![1usize, 3, 5]),
        f2 in 1usize..3,
        units in 2usize..6,
        rate in 0.0f64..0.6,
        l1 in prop::sample::select(vec![0.0, 1e-3]),
        seed in 0u64..1000,
    ) {
        let layers = vec![
            LayerSpec::Conv2d { filters: f1, kernel_h: k1, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate },
            LayerSpec::Conv2d { filters: f2, kernel_h: 3, kernel_w: k1 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { units },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 5 },
            LayerSpec::Softmax,
        ];
        assert_gradients(small_net(layers, [h, w, 1], l1, seed), 2, None, seed);
    }

    #[test]
    fn softmax_normalises(logits in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let p = softmax(&logits);
        let s: f64 = p.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
