//! The six reference classifiers, their hyperparameter grids and AUC scoring.

mod ann;
mod auc;
mod forest;
mod knn;
mod logit;
mod scale;
mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ann::AnnModel;
pub use auc::auc;
pub use forest::ForestModel;
pub use knn::KnnModel;
pub use logit::LogitModel;
pub use scale::Standardizer;
pub use svm::{SvmModel, KKT_TOLERANCE};
pub use tree::{DecisionTree, TreeParams};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub const DT_CP_GRID: [f64; 3] = [0.81, 0.03, 0.0];
pub const KNN_K_GRID: [usize; 3] = [9, 7, 5];
pub const RF_TREES: usize = 500;
pub const RF_MTRY: usize = 2;
pub const ANN_HIDDEN_GRID: [usize; 3] = [1, 3, 5];
pub const ANN_DECAY_GRID: [f64; 3] = [0.1, 1e-4, 0.0];
pub const SVM_C_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const SVM_SIGMA: f64 = 1.004454;
pub const DEFAULT_TIE_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierFamily {
    Logit,
    DT,
    #[serde(rename = "kNN")]
    KNN,
    RF,
    ANN,
    SVM,
}

impl ClassifierFamily {
    pub const ALL: [ClassifierFamily; 6] = [
        ClassifierFamily::Logit,
        ClassifierFamily::DT,
        ClassifierFamily::KNN,
        ClassifierFamily::RF,
        ClassifierFamily::ANN,
        ClassifierFamily::SVM,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierFamily::Logit => "Logit",
            ClassifierFamily::DT => "DT",
            ClassifierFamily::KNN => "kNN",
            ClassifierFamily::RF => "RF",
            ClassifierFamily::ANN => "ANN",
            ClassifierFamily::SVM => "SVM",
        }
    }

    /// Hyperparameter grid, least complex setting first.
    pub fn grid(self) -> Vec<Hyperparams> {
        match self {
            ClassifierFamily::Logit => vec![Hyperparams::Logit],
            ClassifierFamily::DT => DT_CP_GRID.iter().map(|&cp| Hyperparams::Tree { cp }).collect(),
            ClassifierFamily::KNN => KNN_K_GRID.iter().map(|&k| Hyperparams::Knn { k }).collect(),
            ClassifierFamily::RF => vec![Hyperparams::Forest { trees: RF_TREES, mtry: RF_MTRY }],
            ClassifierFamily::ANN => ANN_HIDDEN_GRID
                .iter()
                .flat_map(|&hidden| ANN_DECAY_GRID.iter().map(move |&decay| Hyperparams::Ann { hidden, decay }))
                .collect(),
            ClassifierFamily::SVM => SVM_C_GRID.iter().map(|&c| Hyperparams::Svm { c, sigma: SVM_SIGMA }).collect(),
        }
    }
}

impl fmt::Display for ClassifierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("k-nn") && *c == Self::KNN))
            .ok_or_else(|| Error::Validation(format!("unknown classifier '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Logit,
    Tree { cp: f64 },
    Knn { k: usize },
    Forest { trees: usize, mtry: usize },
    Ann { hidden: usize, decay: f64 },
    Svm { c: f64, sigma: f64 },
}

impl Hyperparams {
    pub fn family(&self) -> ClassifierFamily {
        match self {
            Hyperparams::Logit => ClassifierFamily::Logit,
            Hyperparams::Tree { .. } => ClassifierFamily::DT,
            Hyperparams::Knn { .. } => ClassifierFamily::KNN,
            Hyperparams::Forest { .. } => ClassifierFamily::RF,
            Hyperparams::Ann { .. } => ClassifierFamily::ANN,
            Hyperparams::Svm { .. } => ClassifierFamily::SVM,
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Logit => write!(f, "-"),
            Hyperparams::Tree { cp } => write!(f, "cp={cp}"),
            Hyperparams::Knn { k } => write!(f, "k={k}"),
            Hyperparams::Forest { trees, mtry } => write!(f, "trees={trees};mtry={mtry}"),
            Hyperparams::Ann { hidden, decay } => write!(f, "size={hidden};decay={decay}"),
            Hyperparams::Svm { c, sigma } => write!(f, "C={c};sigma={sigma}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logit(LogitModel),
    Tree(DecisionTree),
    Knn(KnnModel),
    Forest(ForestModel),
    Ann(AnnModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub hyperparams: Hyperparams,
    pub n_features: usize,
    pub model: Model,
}

impl FittedModel {
    pub fn family(&self) -> ClassifierFamily {
        self.hyperparams.family()
    }

    /// Continuous scores, larger meaning more likely positive.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Shape(format!("model expects {} features, got {}", self.n_features, x.cols())));
        }
        let rows = 0..x.rows();
        let scores: Vec<f64> = match &self.model {
            Model::Logit(m) => rows.map(|i| m.score_row(x.row(i))).collect(),
            Model::Tree(t) => rows.map(|i| t.proba_row(x.row(i))[1]).collect(),
            Model::Knn(m) => rows.map(|i| m.score_row(x.row(i))).collect(),
            Model::Forest(m) => rows.map(|i| m.score_row(x.row(i))).collect(),
            Model::Ann(m) => rows.map(|i| m.score_row(x.row(i))).collect(),
            Model::Svm(m) => rows.map(|i| m.score_row(x.row(i))).collect(),
        };
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numerical { layer: 0, detail: format!("{} produced a non-finite score", self.family()) });
        }
        Ok(scores)
    }
}

/// Fit one classifier at a fixed hyperparameter setting.
pub fn fit(hyperparams: &Hyperparams, train: &TabularDataset, seed: u64) -> Result<FittedModel> {
    train.validate()?;
    train.require_both_classes()?;
    let x = &train.features;
    let y = &train.labels;
    let model = match *hyperparams {
        Hyperparams::Logit => Model::Logit(LogitModel::fit(x, y)?),
        Hyperparams::Tree { cp } => {
            let t: Vec<usize> = y.iter().map(|&l| usize::from(l > 0)).collect();
            Model::Tree(DecisionTree::fit(x, &t, 2, TreeParams { cp, mtry: None }, None)?)
        }
        Hyperparams::Knn { k } => {
            if k == 0 {
                return Err(Error::Validation("k must be positive".into()));
            }
            Model::Knn(KnnModel::fit(x, y, k))
        }
        Hyperparams::Forest { trees, mtry } => {
            if trees == 0 || mtry == 0 {
                return Err(Error::Validation("forest needs trees and mtry > 0".into()));
            }
            Model::Forest(ForestModel::fit(x, y, trees, mtry, seed)?)
        }
        Hyperparams::Ann { hidden, decay } => {
            if hidden == 0 || !(decay >= 0.0) {
                return Err(Error::Validation(format!("bad ANN setting {hyperparams}")));
            }
            Model::Ann(AnnModel::fit(x, y, hidden, decay, seed))
        }
        Hyperparams::Svm { c, sigma } => Model::Svm(SvmModel::fit(x, y, c, sigma)?),
    };
    Ok(FittedModel { hyperparams: *hyperparams, n_features: train.n(), model })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub model: FittedModel,
    /// Internal validation AUC of the chosen setting; `None` for singleton grids.
    pub validation_auc: Option<f64>,
    pub test_auc: f64,
    pub failed_settings: usize,
}

/// Seeded, stratified 80/20 split of row indices into (fit, validation).
pub fn stratified_split(labels: &[i8], fraction: f64, seed: u64, tag: &str) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut r = rng::substream(seed, tag, 0);
    let mut fit = Vec::new();
    let mut hold = Vec::new();
    for class in [-1i8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        let k = ((idx.len() as f64 * fraction).round() as usize).clamp(usize::from(idx.len() > 1), idx.len().saturating_sub(1));
        hold.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

/// Choose a grid point on an internal validation split, refit on all of
/// `train`, and report AUC on `test`.
pub fn grid_evaluate(family: ClassifierFamily, train: &TabularDataset, test: &TabularDataset, seed: u64) -> Result<GridOutcome> {
    train.require_both_classes()?;
    test.require_both_classes()?;
    let grid = family.grid();
    let mut failed = 0;
    let (chosen, validation_auc) = if grid.len() == 1 {
        (grid[0], None)
    } else {
        let (fit_idx, val_idx) = stratified_split(&train.labels, 0.2, seed, "grid-split");
        let inner = train.subset(&fit_idx);
        let val = train.subset(&val_idx);
        if !inner.has_both_classes() || !val.has_both_classes() {
            return Err(Error::Validation(format!("dataset '{}' too small for a validation split", train.name)));
        }
        let mut best: Option<(Hyperparams, f64)> = None;
        let mut last_err = None;
        for hp in &grid {
            let scored = fit(hp, &inner, seed).and_then(|m| m.score(&val.features)).and_then(|s| auc(&s, &val.labels));
            match scored {
                Ok(a) if best.is_none_or(|(_, b)| a > b) => best = Some((*hp, a)),
                Ok(_) => {}
                Err(e) => {
                    failed += 1;
                    last_err = Some(e);
                }
            }
        }
        match best {
            Some((hp, a)) => (hp, Some(a)),
            None => return Err(last_err.expect("grid is non-empty")),
        }
    };
    let model = fit(&chosen, train, seed)?;
    let test_auc = auc(&model.score(&test.features)?, &test.labels)?;
    Ok(GridOutcome { model, validation_auc, test_auc, failed_settings: failed })
}

/// Grid-evaluate every family; results follow `ClassifierFamily::ALL`.
pub fn evaluate_families(train: &TabularDataset, test: &TabularDataset, seed: u64) -> Result<Vec<(ClassifierFamily, GridOutcome)>> {
    ClassifierFamily::ALL.iter().map(|&f| grid_evaluate(f, train, test, seed).map(|o| (f, o))).collect()
}

/// Stratified assignment of rows to `k` folds. Each class is shuffled and
/// dealt round-robin, so fold sizes per class differ by at most one.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    let mut r = rng::substream(seed, "cv-folds", 0);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [-1i8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Validation(format!("class {class} has {} rows, fewer than {k} folds", idx.len())));
        }
        idx.shuffle(&mut r);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean test AUC of every family over stratified `k`-fold cross-validation.
/// Each fold runs [`grid_evaluate`] with its own seed.
pub fn cross_validate(ds: &TabularDataset, k: usize, seed: u64) -> Result<Vec<(ClassifierFamily, f64)>> {
    ds.require_both_classes()?;
    let folds = stratified_folds(&ds.labels, k, seed)?;
    let mut sums = [0.0; 6];
    for (f, hold) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..ds.m()).filter(|i| hold.binary_search(i).is_err()).collect();
        let train = ds.subset(&train_idx);
        let test = ds.subset(hold);
        let fold_seed = rng::derive_seed(seed, "cv-fold").wrapping_add(f as u64);
        for (family, out) in evaluate_families(&train, &test, fold_seed)? {
            sums[family.index()] += out.test_auc;
        }
    }
    Ok(ClassifierFamily::ALL.iter().map(|&f| (f, sums[f.index()] / k as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestSet {
    pub best: Vec<ClassifierFamily>,
    pub runner_up: Vec<ClassifierFamily>,
}

/// Families within `tie_epsilon` of the top AUC, plus the next tier.
pub fn best_classifiers(aucs: &[(ClassifierFamily, f64)], tie_epsilon: f64) -> BestSet {
    let tier = |pool: &[(ClassifierFamily, f64)]| -> Vec<ClassifierFamily> {
        let Some(top) = pool.iter().map(|p| p.1).max_by(f64::total_cmp) else { return Vec::new() };
        let mut out: Vec<_> = pool.iter().filter(|p| p.1 >= top - tie_epsilon).map(|p| p.0).collect();
        out.sort();
        out
    };
    let best = tier(aucs);
    let rest: Vec<_> = aucs.iter().filter(|p| !best.contains(&p.0)).copied().collect();
    BestSet { runner_up: tier(&rest), best }
}

#[cfg(test)]
mod tests;
