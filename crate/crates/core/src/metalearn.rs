//! Meta-learners over pattern classes and the recommendation layer on top.
//!
//! Two meta-models are provided: the convolutional network trained on
//! canonical images, and a five-class decision tree trained on meta-feature
//! vectors. Either one yields a probability vector over [`PatternClass`],
//! which [`Recommendation::from_probs`] turns into a ranked pair of
//! classifier families.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ClassifierFamily, DT_CP_GRID};
use crate::baselines::tree::{DecisionTree, TreeParams};
use crate::canonicalize::{canonicalize, CanonSpec};
use crate::dataset::{PatternClass, TabularDataset};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::metafeatures::{extract_all, MetaFeatureVector};
use crate::nn::{argmax, softmax, train, AdamConfig, ConvNet, EpochStats, Examples, Mode, TrainConfig};
use crate::rng;

/// Below this top probability a recommendation is flagged undecided.
pub const DEFAULT_THRESHOLD: f64 = 0.4;
/// Share of each pattern class held out for evaluation.
pub const HOLDOUT_FRACTION: f64 = 0.1;
pub const DEFAULT_L1: f64 = 1e-5;

/// The two families that do best on each pattern, best first.
pub fn pattern_to_classifiers(p: PatternClass) -> [ClassifierFamily; 2] {
    use ClassifierFamily::*;
    match p {
        PatternClass::C1 => [Logit, ANN],
        PatternClass::C2 => [KNN, RF],
        PatternClass::C3 => [SVM, RF],
        PatternClass::C4 => [SVM, KNN],
        PatternClass::C5 => [SVM, RF],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationStatus {
    Confident,
    Undecided,
}

impl fmt::Display for RecommendationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecommendationStatus::Confident => "confident",
            RecommendationStatus::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub probs: [f64; 5],
    pub predicted: PatternClass,
    pub ranked_classifiers: [ClassifierFamily; 2],
    pub confidence: f64,
    pub status: RecommendationStatus,
}

impl Recommendation {
    /// Builds a recommendation from non-negative class scores. The scores are
    /// normalised to sum to one; ties in the top score go to the lower class.
    pub fn from_probs(scores: &[f64], threshold: f64) -> Result<Self> {
        if scores.len() != PatternClass::COUNT {
            return Err(Error::Shape(format!("expected {} class probabilities, got {}", PatternClass::COUNT, scores.len())));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return invalid(format!("class probability {v} is not a finite non-negative number"));
        }
        if !threshold.is_finite() {
            return invalid("threshold must be finite");
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return invalid("class probabilities sum to zero");
        }
        let mut probs = [0.0; 5];
        for (p, s) in probs.iter_mut().zip(scores) {
            *p = s / total;
        }
        let k = argmax(&probs);
        let predicted = PatternClass::ALL[k];
        let confidence = probs[k];
        let status = if confidence < threshold { RecommendationStatus::Undecided } else { RecommendationStatus::Confident };
        Ok(Self { probs, predicted, ranked_classifiers: pattern_to_classifiers(predicted), confidence, status })
    }

    pub fn from_logits(logits: &[f64], threshold: f64) -> Result<Self> {
        Self::from_probs(&softmax(logits), threshold)
    }
}

/// Flattened canonical image of every dataset, computed in parallel.
pub fn canonical_inputs(datasets: &[TabularDataset], spec: &CanonSpec) -> Result<Vec<Vec<f64>>> {
    datasets
        .par_iter()
        .map(|ds| canonicalize(ds, spec).map(|img| img.pixels.into_vec()))
        .collect()
}

fn class_probs(net: &ConvNet, input: &[f64]) -> Result<Vec<f64>> {
    let cache = net.forward(input, 1, Mode::Inference)?;
    Ok(cache.probs().to_vec())
}

/// Canonicalise, run the network in inference mode and map the prediction.
pub fn recommend(net: &ConvNet, ds: &TabularDataset, spec: &CanonSpec, threshold: f64) -> Result<Recommendation> {
    let img = canonicalize(ds, spec)?;
    let input = img.pixels.into_vec();
    if input.len() != net.input_len() {
        return Err(Error::Shape(format!(
            "canonical image has {} values but the network expects {}",
            input.len(),
            net.input_len()
        )));
    }
    Recommendation::from_probs(&class_probs(net, &input)?, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub dataset: String,
    pub predicted: PatternClass,
    pub recommended: [ClassifierFamily; 2],
    pub best_set: Vec<ClassifierFamily>,
    pub status: RecommendationStatus,
    pub hit: bool,
    /// Position (1 or 2) of the first recommended family found in `best_set`.
    pub rank: Option<u8>,
}

pub fn hit_eval(dataset: &str, rec: &Recommendation, best_set: &[ClassifierFamily]) -> Result<HitRecord> {
    if best_set.is_empty() {
        return invalid(format!("dataset '{dataset}' has an empty best set"));
    }
    let rank = rec
        .ranked_classifiers
        .iter()
        .position(|f| best_set.contains(f))
        .map(|i| i as u8 + 1);
    Ok(HitRecord {
        dataset: dataset.to_string(),
        predicted: rec.predicted,
        recommended: rec.ranked_classifiers,
        best_set: best_set.to_vec(),
        status: rec.status,
        hit: rank.is_some(),
        rank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitSummary {
    pub rate: f64,
    pub hits: usize,
    pub total: usize,
    pub rank1: usize,
    pub rank2: usize,
    /// Undecided records left out of the denominator.
    pub excluded: usize,
}

/// Hit rate over `records`. Undecided rows count unless `exclude_undecided`.
pub fn hit_rate(records: &[HitRecord], exclude_undecided: bool) -> Result<HitSummary> {
    let kept: Vec<&HitRecord> = records
        .iter()
        .filter(|r| !(exclude_undecided && r.status == RecommendationStatus::Undecided))
        .collect();
    if kept.is_empty() {
        return invalid("no hit records to score");
    }
    let count = |rank| kept.iter().filter(|r| r.rank == Some(rank)).count();
    let (rank1, rank2) = (count(1), count(2));
    let hits = rank1 + rank2;
    Ok(HitSummary {
        rate: hits as f64 / kept.len() as f64,
        hits,
        total: kept.len(),
        rank1,
        rank2,
        excluded: records.len() - kept.len(),
    })
}

/// Hit rate of a recommender that picks two distinct families uniformly at
/// random, scored against a uniformly random single best family.
pub fn random_recommender_hit_rate(trials: usize, seed: u64) -> f64 {
    let mut r = rng::substream(seed, "random-recommender", 0);
    let mut families = ClassifierFamily::ALL;
    let mut hits = 0usize;
    for _ in 0..trials {
        let best = ClassifierFamily::ALL[r.random_range(0..ClassifierFamily::ALL.len())];
        let (picked, _) = families.partial_shuffle(&mut r, 2);
        if picked.contains(&best) {
            hits += 1;
        }
    }
    hits as f64 / trials.max(1) as f64
}

/// Confusion matrix (rows = truth, columns = prediction) with micro and
/// macro precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Vec<Vec<usize>>,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let diag: usize = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        diag as f64 / total as f64
    }

    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Metrics over class indices `0..n_classes`. A class with no predictions
/// (or no truth rows) scores 0 precision (or recall) in the macro mean.
pub fn evaluate_labels(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} truth labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return invalid("cannot evaluate an empty prediction set");
    }
    if let Some(&c) = pred.iter().chain(truth).find(|&&c| c >= n_classes) {
        return invalid(format!("class index {c} outside 0..{n_classes}"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let total = pred.len();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let micro = correct as f64 / total as f64;

    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let actual: usize = confusion[c].iter().sum();
        let (p, r) = (ratio(tp, predicted), ratio(tp, actual));
        ps += p;
        rs += r;
        fs += f1(p, r);
    }
    let k = n_classes as f64;
    Ok(EvalReport {
        confusion,
        precision_micro: micro,
        recall_micro: micro,
        f1_micro: micro,
        precision_macro: ps / k,
        recall_macro: rs / k,
        f1_macro: fs / k,
    })
}

pub fn evaluate_multiclass(pred: &[PatternClass], truth: &[PatternClass]) -> Result<EvalReport> {
    let p: Vec<usize> = pred.iter().map(|c| c.index()).collect();
    let t: Vec<usize> = truth.iter().map(|c| c.index()).collect();
    evaluate_labels(&p, &t, PatternClass::COUNT)
}

/// Pattern label of every dataset; fails on an unlabelled one.
pub fn pattern_labels(datasets: &[TabularDataset]) -> Result<Vec<PatternClass>> {
    datasets
        .iter()
        .map(|d| d.pattern.ok_or_else(|| Error::Validation(format!("dataset '{}' has no pattern label", d.name))))
        .collect()
}

fn require_all_classes(labels: &[PatternClass], min: usize) -> Result<()> {
    for p in PatternClass::ALL {
        let n = labels.iter().filter(|&&l| l == p).count();
        if n < min {
            return invalid(format!("pattern {p} has {n} datasets, at least {min} required"));
        }
    }
    Ok(())
}

/// Per-class shuffled split; each class keeps at least one member on both sides.
pub fn stratified_pattern_split(labels: &[PatternClass], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    require_all_classes(labels, 2)?;
    let mut r = rng::substream(seed, "meta-split", 0);
    let (mut fit, mut hold) = (Vec::new(), Vec::new());
    for p in PatternClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == p).collect();
        idx.shuffle(&mut r);
        let k = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        hold.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    Ok((fit, hold))
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Settings for the image meta-learner. Seeds come from the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub canon: CanonSpec,
    pub l1_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl CnnConfig {
    pub fn desk() -> Self {
        let t = TrainConfig::desk(0);
        Self { canon: CanonSpec::desk(), l1_lambda: DEFAULT_L1, batch_size: t.batch_size, epochs: t.epochs, adam: t.adam }
    }

    pub fn full_scale() -> Self {
        let t = TrainConfig::full_scale(0);
        Self { canon: CanonSpec::full_scale(), l1_lambda: DEFAULT_L1, batch_size: t.batch_size, epochs: t.epochs, adam: t.adam }
    }
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone)]
pub struct CnnMetaModel {
    pub net: ConvNet,
    pub canon: CanonSpec,
    pub history: Vec<EpochStats>,
}

impl CnnMetaModel {
    pub fn probs(&self, ds: &TabularDataset) -> Result<Vec<f64>> {
        let img = canonicalize(ds, &self.canon)?;
        class_probs(&self.net, img.pixels.as_slice())
    }

    pub fn predict_all(&self, datasets: &[TabularDataset]) -> Result<Vec<PatternClass>> {
        datasets
            .par_iter()
            .map(|d| self.probs(d).map(|p| PatternClass::ALL[argmax(&p)]))
            .collect()
    }

    pub fn evaluate(&self, datasets: &[TabularDataset]) -> Result<EvalReport> {
        let truth = pattern_labels(datasets)?;
        evaluate_multiclass(&self.predict_all(datasets)?, &truth)
    }
}

/// Train the image meta-learner on every dataset in `train_set`.
pub fn fit_cnn_meta(train_set: &[TabularDataset], cfg: &CnnConfig, seed: u64) -> Result<CnnMetaModel> {
    let targets: Vec<usize> = pattern_labels(train_set)?.iter().map(|p| p.index()).collect();
    let inputs = canonical_inputs(train_set, &cfg.canon)?;
    let mut net = ConvNet::standard(cfg.canon.rows, cfg.canon.cols, cfg.l1_lambda, rng::derive_seed(seed, "cnn-init"))?;
    let tc = TrainConfig {
        batch_size: cfg.batch_size.min(inputs.len()),
        epochs: cfg.epochs,
        seed: rng::derive_seed(seed, "cnn-train"),
        adam: cfg.adam,
    };
    let history = train(&mut net, Examples { inputs: &inputs, targets: &targets }, &tc)?;
    Ok(CnnMetaModel { net, canon: cfg.canon, history })
}

#[derive(Debug, Clone)]
pub struct MetaOutcome<M> {
    pub model: M,
    pub report: EvalReport,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Stratified 90/10 split of `corpus`, train on the larger part, report on the rest.
pub fn train_cnn_meta(corpus: &[TabularDataset], cfg: &CnnConfig, seed: u64) -> Result<MetaOutcome<CnnMetaModel>> {
    let labels = pattern_labels(corpus)?;
    let (train_idx, test_idx) = stratified_pattern_split(&labels, HOLDOUT_FRACTION, seed)?;
    let model = fit_cnn_meta(&pick(corpus, &train_idx), cfg, seed)?;
    let report = model.evaluate(&pick(corpus, &test_idx))?;
    Ok(MetaOutcome { model, report, train_idx, test_idx })
}

/// Five-class decision tree over meta-feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfMetaModel {
    pub tree: DecisionTree,
    /// Macro F1 of each cp grid point on the internal validation split.
    pub validation_f1: Vec<(f64, f64)>,
}

impl MfMetaModel {
    pub fn probs(&self, v: &MetaFeatureVector) -> Vec<f64> {
        self.tree.proba_row(&v.values)
    }

    pub fn predict(&self, v: &MetaFeatureVector) -> PatternClass {
        PatternClass::ALL[self.tree.predict_row(&v.values)]
    }

    pub fn evaluate(&self, vectors: &[MetaFeatureVector], truth: &[PatternClass]) -> Result<EvalReport> {
        let pred: Vec<PatternClass> = vectors.iter().map(|v| self.predict(v)).collect();
        evaluate_multiclass(&pred, truth)
    }
}

fn vectors_matrix(vectors: &[MetaFeatureVector]) -> Result<Matrix> {
    Matrix::from_rows(&vectors.iter().map(|v| v.values.clone()).collect::<Vec<_>>())
}

fn fit_tree(vectors: &[MetaFeatureVector], labels: &[PatternClass], cp: f64) -> Result<DecisionTree> {
    let y: Vec<usize> = labels.iter().map(|p| p.index()).collect();
    DecisionTree::fit(&vectors_matrix(vectors)?, &y, PatternClass::COUNT, TreeParams { cp, mtry: None }, None)
}

/// Picks cp from the tree grid on an internal 80/20 split (first best wins),
/// then refits on everything.
pub fn fit_mf_meta(vectors: &[MetaFeatureVector], labels: &[PatternClass], seed: u64) -> Result<MfMetaModel> {
    if vectors.len() != labels.len() {
        return Err(Error::Shape(format!("{} meta-feature vectors for {} labels", vectors.len(), labels.len())));
    }
    let (fit_idx, val_idx) = stratified_pattern_split(labels, 0.2, rng::derive_seed(seed, "mf-grid"))?;
    let (fit_v, fit_l) = (pick(vectors, &fit_idx), pick(labels, &fit_idx));
    let (val_v, val_l) = (pick(vectors, &val_idx), pick(labels, &val_idx));
    let mut validation_f1 = Vec::with_capacity(DT_CP_GRID.len());
    let mut best: Option<(f64, f64)> = None;
    for cp in DT_CP_GRID {
        let tree = fit_tree(&fit_v, &fit_l, cp)?;
        let model = MfMetaModel { tree, validation_f1: Vec::new() };
        let score = model.evaluate(&val_v, &val_l)?.f1_macro;
        validation_f1.push((cp, score));
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((cp, score));
        }
    }
    let (cp, _) = best.expect("grid is non-empty");
    Ok(MfMetaModel { tree: fit_tree(vectors, labels, cp)?, validation_f1 })
}

/// Meta-feature vectors and pattern labels for a labelled corpus.
pub fn meta_features(corpus: &[TabularDataset]) -> Result<(Vec<MetaFeatureVector>, Vec<PatternClass>)> {
    let labels = pattern_labels(corpus)?;
    let vectors = extract_all(corpus).into_iter().collect::<Result<Vec<_>>>()?;
    Ok((vectors, labels))
}

pub fn train_mf_meta(corpus: &[TabularDataset], seed: u64) -> Result<MetaOutcome<MfMetaModel>> {
    let (vectors, labels) = meta_features(corpus)?;
    let (train_idx, test_idx) = stratified_pattern_split(&labels, HOLDOUT_FRACTION, seed)?;
    let model = fit_mf_meta(&pick(&vectors, &train_idx), &pick(&labels, &train_idx), seed)?;
    let report = model.evaluate(&pick(&vectors, &test_idx), &pick(&labels, &test_idx))?;
    Ok(MetaOutcome { model, report, train_idx, test_idx })
}
