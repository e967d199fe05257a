use super::*;
use crate::dataset::PatternClass;
use crate::pattern_sim::{gen_pattern, PatternSpec};

fn fixture(pattern: PatternClass, m: usize, noise_sd: f64, seed: u64) -> TabularDataset {
    let spec = PatternSpec { noise_sd, ..PatternSpec::reference(pattern, m, seed) };
    gen_pattern(&spec).unwrap()
}

fn train_auc(model: &FittedModel, ds: &TabularDataset) -> f64 {
    auc(&model.score(&ds.features).unwrap(), &ds.labels).unwrap()
}

#[test]
fn grids_are_ordered_simplest_first() {
    assert_eq!(ClassifierFamily::DT.grid()[0], Hyperparams::Tree { cp: 0.81 });
    assert_eq!(ClassifierFamily::KNN.grid()[0], Hyperparams::Knn { k: 9 });
    assert_eq!(ClassifierFamily::ANN.grid().len(), 9);
    assert_eq!(ClassifierFamily::ANN.grid()[0], Hyperparams::Ann { hidden: 1, decay: 0.1 });
    let cs: Vec<f64> = ClassifierFamily::SVM
        .grid()
        .iter()
        .map(|h| match h {
            Hyperparams::Svm { c, .. } => *c,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(cs, vec![0.25, 0.5, 1.0, 2.0, 4.0]);
    for f in ClassifierFamily::ALL {
        assert!(f.grid().iter().all(|h| h.family() == f));
        assert_eq!(f.name().parse::<ClassifierFamily>().unwrap(), f);
    }
    assert_eq!("k-NN".parse::<ClassifierFamily>().unwrap(), ClassifierFamily::KNN);
}

#[test]
fn logit_separates_noise_free_linear_data() {
    let ds = fixture(PatternClass::C1, 200, 0.05, 1);
    let model = fit(&Hyperparams::Logit, &ds, 0).unwrap();
    assert_eq!(train_auc(&model, &ds), 1.0);
}

#[test]
fn logit_scores_are_antisymmetric_about_the_boundary() {
    let x = Matrix::from_rows(&[vec![-2.0], vec![-1.0], vec![-0.5], vec![0.5], vec![1.0], vec![2.0], vec![-0.2], vec![0.2]]).unwrap();
    let ds = TabularDataset::new("sym", x, vec![-1, -1, 1, -1, 1, 1, 1, -1]).unwrap();
    let model = fit(&Hyperparams::Logit, &ds, 0).unwrap();
    let s = model.score(&Matrix::from_rows(&[vec![1.3], vec![-1.3]]).unwrap()).unwrap();
    assert!((s[0] + s[1]).abs() < 1e-9);
}

#[test]
fn single_class_training_fails() {
    let ds = TabularDataset::new("one", Matrix::zeros(3, 2), vec![1, 1, 1]).unwrap();
    for f in ClassifierFamily::ALL {
        assert!(matches!(fit(&f.grid()[0], &ds, 0), Err(Error::Validation(_))));
    }
}

#[test]
fn score_checks_columns() {
    let ds = fixture(PatternClass::C1, 40, 0.5, 2);
    let model = fit(&Hyperparams::Knn { k: 5 }, &ds, 0).unwrap();
    assert!(matches!(model.score(&Matrix::zeros(2, 3)), Err(Error::Shape(_))));
}

#[test]
fn knn_scores_are_neighbour_fractions() {
    let ds = fixture(PatternClass::C2, 100, 0.3, 3);
    let model = fit(&Hyperparams::Knn { k: 7 }, &ds, 0).unwrap();
    for s in model.score(&ds.features).unwrap() {
        assert!((s * 7.0 - (s * 7.0).round()).abs() < 1e-12);
    }
}

#[test]
fn forest_is_seed_deterministic_and_beats_a_single_tree() {
    let ds = fixture(PatternClass::C3, 200, 0.25, 4);
    let hp = Hyperparams::Forest { trees: 60, mtry: 2 };
    let a = fit(&hp, &ds, 11).unwrap();
    let b = fit(&hp, &ds, 11).unwrap();
    assert_eq!(a, b);
    let scores = a.score(&ds.features).unwrap();
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
    let tree = fit(&Hyperparams::Tree { cp: 0.03 }, &ds, 11).unwrap();
    assert!(train_auc(&a, &ds) >= train_auc(&tree, &ds));
}

#[test]
fn forest_handles_xor() {
    let train = fixture(PatternClass::C2, 1000, PatternClass::C2.reference_noise(), 5);
    let test = fixture(PatternClass::C2, 1000, PatternClass::C2.reference_noise(), 6);
    let out = grid_evaluate(ClassifierFamily::RF, &train, &test, 0).unwrap();
    assert!(out.test_auc >= 0.85, "{}", out.test_auc);
}

#[test]
fn svm_meets_kkt_tolerance_on_every_pattern() {
    for p in PatternClass::ALL {
        let ds = fixture(p, 300, p.reference_noise(), 7);
        for hp in ClassifierFamily::SVM.grid() {
            let Model::Svm(m) = fit(&hp, &ds, 0).unwrap().model else { unreachable!() };
            assert!(m.kkt_gap <= KKT_TOLERANCE, "{p} {hp}: {}", m.kkt_gap);
        }
    }
}

#[test]
fn singleton_grid_equals_direct_fit() {
    let train = fixture(PatternClass::C5, 200, 0.3, 8);
    let test = fixture(PatternClass::C5, 200, 0.3, 9);
    let out = grid_evaluate(ClassifierFamily::Logit, &train, &test, 3).unwrap();
    let direct = fit(&Hyperparams::Logit, &train, 3).unwrap();
    assert_eq!(out.test_auc, auc(&direct.score(&test.features).unwrap(), &test.labels).unwrap());
    assert_eq!(out.validation_auc, None);
}

#[test]
fn grid_evaluate_is_deterministic() {
    let train = fixture(PatternClass::C4, 150, 0.3, 10);
    let test = fixture(PatternClass::C4, 150, 0.3, 11);
    let a = grid_evaluate(ClassifierFamily::ANN, &train, &test, 5).unwrap();
    let b = grid_evaluate(ClassifierFamily::ANN, &train, &test, 5).unwrap();
    assert_eq!(a, b);
    assert!(a.validation_auc.is_some());
}

#[test]
fn stratified_split_keeps_both_classes() {
    let labels: Vec<i8> = (0..50).map(|i| if i < 10 { 1 } else { -1 }).collect();
    let (fit_idx, val) = stratified_split(&labels, 0.2, 1, "t");
    assert_eq!(fit_idx.len() + val.len(), 50);
    assert_eq!(val.iter().filter(|&&i| labels[i] > 0).count(), 2);
    assert_eq!(val.len(), 10);
}

#[test]
fn best_classifier_ties() {
    use ClassifierFamily::*;
    let ds3 = [(Logit, 0.99), (DT, 0.985), (KNN, 0.999), (RF, 0.995), (ANN, 1.0), (SVM, 1.0)];
    let b = best_classifiers(&ds3, 1e-6);
    assert_eq!(b.best, vec![ANN, SVM]);
    assert_eq!(b.runner_up, vec![KNN]);
    let distinct = [(Logit, 0.7), (DT, 0.8), (KNN, 0.9), (RF, 0.85), (ANN, 0.6), (SVM, 0.5)];
    assert_eq!(best_classifiers(&distinct, DEFAULT_TIE_EPSILON).best, vec![KNN]);
    let flat: Vec<_> = ClassifierFamily::ALL.iter().map(|&f| (f, 0.8)).collect();
    let b = best_classifiers(&flat, DEFAULT_TIE_EPSILON);
    assert_eq!(b.best.len(), 6);
    assert!(b.runner_up.is_empty());
}

#[test]
fn folds_partition_rows_and_stratify() {
    let labels: Vec<i8> = (0..53).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
    let folds = stratified_folds(&labels, 5, 4).unwrap();
    let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..53).collect::<Vec<_>>());
    for f in &folds {
        let pos = f.iter().filter(|&&i| labels[i] > 0).count();
        assert!((3..=4).contains(&pos), "{pos}");
        assert!((10..=11).contains(&f.len()));
    }
    assert_eq!(folds, stratified_folds(&labels, 5, 4).unwrap());
    assert!(stratified_folds(&labels, 1, 4).is_err());
    assert!(stratified_folds(&labels[..4], 5, 4).is_err());
}

#[test]
fn cross_validation_scores_every_family() {
    let ds = fixture(PatternClass::C3, 120, 0.28, 21);
    let cv = cross_validate(&ds, 3, 1).unwrap();
    assert_eq!(cv.len(), 6);
    for (f, a) in &cv {
        assert!((0.0..=1.0).contains(a), "{f} {a}");
    }
    let svm = cv[ClassifierFamily::SVM.index()].1;
    assert!(svm > 0.9, "{svm}");
}
