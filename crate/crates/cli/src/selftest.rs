//! Quick invariant checks over the installed build.

use rand::Rng;
use tabpat::baselines::auc;
use tabpat::metafeatures::class_overlap_stats;
use tabpat::metalearn::{pattern_to_classifiers, random_recommender_hit_rate};
use tabpat::nn::{check_gradients, softmax, ConvNet, GradCheckConfig, LayerSpec};
use tabpat::rng::substream;
use tabpat::{canonicalize, gen_pattern, CanonSpec, Matrix, PatternClass, PatternSpec, TabularDataset};

use crate::artifact::{decode, encode, Fingerprint};

type Check = (&'static str, fn() -> Result<(), String>);

pub const CHECKS: [Check; 8] = [
    ("softmax-normalises", softmax_normalises),
    ("pattern-mapping", pattern_mapping),
    ("auc-brute-force", auc_brute_force),
    ("canonical-shape", canonical_shape),
    ("gradients", gradients),
    ("random-recommender", random_recommender),
    ("artifact-round-trip", artifact_round_trip),
    ("balanced-entropy", balanced_entropy),
];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn softmax_normalises() -> Result<(), String> {
    let mut r = substream(1, "selftest", 0);
    for _ in 0..1000 {
        let logits: Vec<f64> = (0..5).map(|_| r.random_range(-50.0..50.0)).collect();
        let s: f64 = softmax(&logits).iter().sum();
        ensure((s - 1.0).abs() <= 1e-9, || format!("sum {s} for {logits:?}"))?;
    }
    Ok(())
}

fn pattern_mapping() -> Result<(), String> {
    use tabpat::baselines::ClassifierFamily::*;
    let table = [[Logit, ANN], [KNN, RF], [SVM, RF], [SVM, KNN], [SVM, RF]];
    for (p, pair) in PatternClass::ALL.iter().zip(table) {
        ensure(pattern_to_classifiers(*p) == pair, || format!("{p} maps to {:?}", pattern_to_classifiers(*p)))?;
    }
    Ok(())
}

fn auc_brute_force() -> Result<(), String> {
    let mut r = substream(2, "selftest", 0);
    for _ in 0..200 {
        let n = r.random_range(2..60);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8u8))).collect();
        let mut labels: Vec<i8> = (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
        labels[0] = 1;
        labels[1] = -1;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] == 1 && labels[j] == -1 {
                    den += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let a = auc(&scores, &labels).map_err(|e| e.to_string())?;
        ensure((a - num / den).abs() <= 1e-12, || format!("auc {a} vs {}", num / den))?;
    }
    Ok(())
}

fn canonical_shape() -> Result<(), String> {
    let spec = CanonSpec::desk();
    for (m, n) in [(4, 1), (37, 3), (500, 9), (1500, 60)] {
        let mut r = substream(3, "selftest", (m * 100 + n) as u64);
        let x: Vec<f64> = (0..m * n).map(|_| r.random::<f64>()).collect();
        let labels: Vec<i8> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let ds = TabularDataset::new("s", Matrix::from_vec(m, n, x).map_err(|e| e.to_string())?, labels).map_err(|e| e.to_string())?;
        let img = canonicalize(&ds, &spec).map_err(|e| e.to_string())?;
        ensure(img.pixels.rows() == spec.rows && img.pixels.cols() == spec.cols && img.pixels.is_finite(), || {
            format!("({m}, {n}) gave {}x{}", img.pixels.rows(), img.pixels.cols())
        })?;
    }
    Ok(())
}

fn small_net() -> Result<ConvNet, String> {
    use LayerSpec::*;
    let layers = vec![
        Conv2d { filters: 2, kernel_h: 3, kernel_w: 3 },
        Relu,
        Dropout { rate: 0.25 },
        Flatten,
        Dense { units: 4 },
        Relu,
        Dense { units: 5 },
        Softmax,
    ];
    ConvNet::new([6, 5, 1], layers, 1e-5, 4).map_err(|e| e.to_string())
}

fn gradients() -> Result<(), String> {
    let mut net = small_net()?;
    let mut r = substream(4, "selftest", 0);
    let x: Vec<f64> = (0..2 * 30).map(|_| r.random_range(-1.0..1.0)).collect();
    let rep = check_gradients(&mut net, &x, &[1, 3], 9, &GradCheckConfig::default()).map_err(|e| e.to_string())?;
    ensure(rep.max_rel_error <= 1e-4, || format!("max relative error {:.3e}", rep.max_rel_error))
}

fn random_recommender() -> Result<(), String> {
    let rate = random_recommender_hit_rate(100_000, 5);
    ensure((rate - 1.0 / 3.0).abs() <= 0.01, || format!("rate {rate}"))
}

fn artifact_round_trip() -> Result<(), String> {
    let net = small_net()?;
    let canon = CanonSpec::new(6, 5, tabpat::CanonStrategy::SortResample);
    let fp = Fingerprint { corpus_seed: 0, train_seed: 0, epochs: 0, datasets: 0 };
    let (back, _) = decode(&encode(&net, &canon, fp)).map_err(|e| e.to_string())?;
    ensure(back.params() == net.params(), || "parameters differ after round trip".into())
}

fn balanced_entropy() -> Result<(), String> {
    let ds = gen_pattern(&PatternSpec::reference(PatternClass::C3, 200, 6)).map_err(|e| e.to_string())?;
    let h = class_overlap_stats(&ds).map_err(|e| e.to_string())?.class_entropy;
    ensure((h - std::f64::consts::LN_2).abs() <= 1e-12, || format!("entropy {h}"))
}

/// Runs every check; returns the failures.
pub fn run() -> Vec<(&'static str, String)> {
    CHECKS
        .iter()
        .filter_map(|(name, f)| match f() {
            Ok(()) => {
                println!("ok    {name}");
                None
            }
            Err(e) => {
                println!("FAIL  {name}: {e}");
                Some((*name, e))
            }
        })
        .collect()
}
