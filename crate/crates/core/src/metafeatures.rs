//! Statistical, dataset-level and class-overlap meta-features.
//!
//! Every vector has [`SCHEMA`] fields in that order. A statistic that is
//! undefined for a dataset is stored as 0 with its validity flag cleared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Standardizer;
use crate::canonicalize::pca_project;
use crate::dataset::TabularDataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;

pub const MMI_BINS: usize = 10;
pub const TRIM_FRACTION: f64 = 0.1;
pub const MIN_ROWS: usize = 10;
const DEGENERATE: f64 = 1e-12;

/// Field names in vector order.
pub const SCHEMA: [&str; 23] = [
    "skewness",
    "kurtosis",
    "iqr",
    "q90",
    "mean",
    "geometric_mean",
    "harmonic_mean",
    "trimmed_mean",
    "sd",
    "mad",
    "index_of_dispersion",
    "m",
    "n",
    "mean_abs_correlation",
    "canonical_correlation_first",
    "canonical_correlation_last",
    "pc1_skewness",
    "pc1_kurtosis",
    "class_entropy",
    "mean_mutual_information",
    "equivalent_variables",
    "noise_signal_ratio",
    "center_of_gravity",
];

/// Per-column summary. Skewness and kurtosis are `None` for constant columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub skewness: Option<f64>,
    /// Non-excess: 3 for a Gaussian.
    pub kurtosis: Option<f64>,
    pub iqr: f64,
    pub q90: f64,
    pub geometric_mean: f64,
    pub harmonic_mean: f64,
    pub trimmed_mean: f64,
    pub mad: f64,
    pub index_of_dispersion: f64,
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population moments; geometric and harmonic means and the index of
/// dispersion use the shifted column `x - min(x) + 1`.
pub fn column_stats(x: &[f64]) -> Result<ColumnStats> {
    if x.len() < 2 {
        return invalid(format!("column statistics need at least 2 values, got {}", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("column contains non-finite values");
    }
    let n = x.len() as f64;
    let mu = mean(x);
    let (mut m2, mut m3, mut m4, mut abs) = (0.0, 0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        abs += d.abs();
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let sd = m2.sqrt();
    let spread = sd > DEGENERATE * mu.abs().max(1.0);
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let shifted: Vec<f64> = x.iter().map(|v| v - min + 1.0).collect();
    let smean = mean(&shifted);
    let svar = shifted.iter().map(|v| (v - smean) * (v - smean)).sum::<f64>() / n;
    let cut = (n * TRIM_FRACTION).floor() as usize;
    Ok(ColumnStats {
        mean: mu,
        sd,
        skewness: spread.then(|| m3 / (m2 * sd)),
        kurtosis: spread.then(|| m4 / (m2 * m2)),
        iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        q90: quantile_sorted(&sorted, 0.9),
        geometric_mean: (shifted.iter().map(|v| v.ln()).sum::<f64>() / n).exp(),
        harmonic_mean: n / shifted.iter().map(|v| 1.0 / v).sum::<f64>(),
        trimmed_mean: mean(&sorted[cut..sorted.len() - cut]),
        mad: abs / n,
        index_of_dispersion: svar / smean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassOverlap {
    /// Class entropy in nats.
    pub class_entropy: f64,
    pub mean_mutual_information: f64,
    /// Mean entropy of the discretised features.
    pub mean_feature_entropy: f64,
    /// `None` when the mean mutual information vanishes.
    pub equivalent_variables: Option<f64>,
    pub noise_signal_ratio: Option<f64>,
    pub center_of_gravity: f64,
}

fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    counts.iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).ln()).sum()
}

/// Equal-frequency bin of each value: the number of interior quantile
/// edges lying strictly below it.
pub fn discretize(x: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..bins).map(|k| quantile_sorted(&sorted, k as f64 / bins as f64)).collect();
    x.iter().map(|&v| edges.partition_point(|&e| e < v)).collect()
}

fn mutual_information(bins: &[usize], classes: &[usize], nb: usize) -> (f64, f64) {
    let mut joint = vec![0.0; nb * 2];
    for (&b, &c) in bins.iter().zip(classes) {
        joint[b * 2 + c] += 1.0;
    }
    let bx: Vec<f64> = (0..nb).map(|b| joint[b * 2] + joint[b * 2 + 1]).collect();
    let by = [(0..nb).map(|b| joint[b * 2]).sum::<f64>(), (0..nb).map(|b| joint[b * 2 + 1]).sum()];
    let hx = entropy(&bx);
    (hx + entropy(&by) - entropy(&joint), hx)
}

pub fn class_overlap_stats(ds: &TabularDataset) -> Result<ClassOverlap> {
    ds.validate()?;
    ds.require_both_classes()?;
    let (neg, pos) = ds.class_counts();
    let class_entropy = entropy(&[neg as f64, pos as f64]);
    let classes: Vec<usize> = ds.labels.iter().map(|&l| usize::from(l > 0)).collect();
    let n = ds.n();
    let (mut mmi, mut hx) = (0.0, 0.0);
    for j in 0..n {
        let (mi, h) = mutual_information(&discretize(&ds.features.column(j), MMI_BINS), &classes, MMI_BINS);
        mmi += mi;
        hx += h;
    }
    let (mmi, hx) = if n > 0 { (mmi / n as f64, hx / n as f64) } else { (0.0, 0.0) };
    let mut centroid = [vec![0.0; n], vec![0.0; n]];
    for (i, &c) in classes.iter().enumerate() {
        for (acc, v) in centroid[c].iter_mut().zip(ds.features.row(i)) {
            *acc += v;
        }
    }
    let cog = (0..n).map(|j| (centroid[1][j] / pos as f64 - centroid[0][j] / neg as f64).powi(2)).sum::<f64>().sqrt();
    let informative = mmi > DEGENERATE;
    Ok(ClassOverlap {
        class_entropy,
        mean_mutual_information: mmi,
        mean_feature_entropy: hx,
        equivalent_variables: informative.then(|| class_entropy / mmi),
        noise_signal_ratio: informative.then(|| (hx - mmi) / mmi),
        center_of_gravity: cog,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureVector {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MetaFeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        SCHEMA.iter().position(|&s| s == name).map(|i| self.values[i])
    }

    pub fn is_valid(&self, name: &str) -> Option<bool> {
        SCHEMA.iter().position(|&s| s == name).map(|i| self.valid[i])
    }
}

struct Builder {
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl Builder {
    fn push(&mut self, v: Option<f64>) {
        match v.filter(|v| v.is_finite()) {
            Some(v) => {
                self.values.push(v);
                self.valid.push(true);
            }
            None => {
                self.values.push(0.0);
                self.valid.push(false);
            }
        }
    }
}

fn average(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| mean(&defined))
}

fn correlation_matrix(x: &Matrix) -> (Matrix, Vec<bool>) {
    let z = Standardizer::fit(x);
    let s = z.apply(x);
    let (m, n) = (x.rows(), x.cols());
    let live: Vec<bool> = z.sd.iter().map(|&v| v > 1e-12).collect();
    let mut r = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let v = (0..m).map(|i| s[(i, a)] * s[(i, b)]).sum::<f64>() / m as f64;
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    (r, live)
}

/// Computes the full meta-feature vector in [`SCHEMA`] order.
pub fn extract(ds: &TabularDataset) -> Result<MetaFeatureVector> {
    ds.validate()?;
    if ds.m() < MIN_ROWS {
        return Err(Error::Size(format!("meta-features need at least {MIN_ROWS} rows, got {}", ds.m())));
    }
    if ds.n() == 0 {
        return invalid("dataset has no feature columns");
    }
    let cols: Vec<ColumnStats> = (0..ds.n()).map(|j| column_stats(&ds.features.column(j))).collect::<Result<_>>()?;
    let mut b = Builder { values: Vec::with_capacity(SCHEMA.len()), valid: Vec::with_capacity(SCHEMA.len()) };
    b.push(average(cols.iter().map(|c| c.skewness)));
    b.push(average(cols.iter().map(|c| c.kurtosis)));
    b.push(average(cols.iter().map(|c| Some(c.iqr))));
    b.push(average(cols.iter().map(|c| Some(c.q90))));
    b.push(average(cols.iter().map(|c| Some(c.mean))));
    b.push(average(cols.iter().map(|c| Some(c.geometric_mean))));
    b.push(average(cols.iter().map(|c| Some(c.harmonic_mean))));
    b.push(average(cols.iter().map(|c| Some(c.trimmed_mean))));
    b.push(average(cols.iter().map(|c| Some(c.sd))));
    b.push(average(cols.iter().map(|c| Some(c.mad))));
    b.push(average(cols.iter().map(|c| Some(c.index_of_dispersion))));
    b.push(Some(ds.m() as f64));
    b.push(Some(ds.n() as f64));

    let (r, live) = correlation_matrix(&ds.features);
    let pairs = (0..ds.n()).flat_map(|a| (0..a).map(move |c| (a, c)));
    b.push(average(pairs.map(|(a, c)| (live[a] && live[c]).then(|| r[(a, c)].abs()))));
    let eig = symmetric_eigen(&r).ok().filter(|_| live.iter().any(|&l| l));
    b.push(eig.as_ref().map(|(v, _)| v[0].max(0.0).sqrt()));
    b.push(eig.as_ref().map(|(v, _)| v[v.len() - 1].max(0.0).sqrt()));

    let standardized = Standardizer::fit(&ds.features).apply(&ds.features);
    let pc1 = pca_project(&standardized, 1)
        .ok()
        .filter(|p| !p.truncated)
        .and_then(|p| column_stats(&p.scores.column(0)).ok());
    b.push(pc1.and_then(|s| s.skewness));
    b.push(pc1.and_then(|s| s.kurtosis));

    match class_overlap_stats(ds) {
        Ok(c) => {
            b.push(Some(c.class_entropy));
            b.push(Some(c.mean_mutual_information));
            b.push(c.equivalent_variables);
            b.push(c.noise_signal_ratio);
            b.push(Some(c.center_of_gravity));
        }
        Err(_) => (0..5).for_each(|_| b.push(None)),
    }
    debug_assert_eq!(b.values.len(), SCHEMA.len());
    Ok(MetaFeatureVector { values: b.values, valid: b.valid })
}

/// Extracts meta-features for many datasets in parallel, preserving order.
pub fn extract_all(datasets: &[TabularDataset]) -> Vec<Result<MetaFeatureVector>> {
    datasets.par_iter().map(extract).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PatternClass;
    use crate::pattern_sim::{gen_pattern, PatternSpec};
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    // independent references
    fn brute_quantile(x: &[f64], p: f64) -> f64 {
        // 1-based order statistics: j = floor(n p + 1 - p), g = n p + 1 - p - j
        let mut s = x.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len() as f64;
        let t = n * p + 1.0 - p;
        let j = t.floor();
        let g = t - j;
        let j = j as usize;
        if j >= s.len() {
            return s[s.len() - 1];
        }
        (1.0 - g) * s[j - 1] + g * s[j]
    }

    fn brute_moment(x: &[f64], k: i32) -> f64 {
        let n = x.len() as f64;
        let mu = x.iter().rev().fold(0.0, |a, v| a + v / n);
        x.iter().rev().map(|v| (v - mu).powi(k)).sum::<f64>() / n
    }

    #[test]
    fn hand_values() {
        let s = column_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert!((s.mad - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.skewness, Some(0.0));
        let s = column_stats(&[-4.0, 0.0, 4.0]).unwrap();
        assert!(s.skewness.unwrap().abs() < 1e-15);
        // kurtosis of a symmetric two-point distribution is 1
        let s = column_stats(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert!((s.kurtosis.unwrap() - 1.0).abs() < 1e-15);
        // shifted column (1, 2, 3): geometric 6^(1/3), harmonic 3 / (11/6), ID (2/3)/2
        let s = column_stats(&[5.0, 6.0, 7.0]).unwrap();
        assert!((s.geometric_mean - 6f64.cbrt()).abs() < 1e-12);
        assert!((s.harmonic_mean - 18.0 / 11.0).abs() < 1e-12);
        assert!((s.index_of_dispersion - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trimmed_mean_drops_ten_percent_each_side() {
        let x: Vec<f64> = (1..=10).map(f64::from).chain([1000.0]).collect();
        // 11 values: one trimmed from each end
        let s = column_stats(&x).unwrap();
        assert!((s.trimmed_mean - (2..=10).sum::<i32>() as f64 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_flags_moments() {
        let s = column_stats(&[2.5; 7]).unwrap();
        assert_eq!(s.skewness, None);
        assert_eq!(s.kurtosis, None);
        assert_eq!(s.sd, 0.0);
        assert!(column_stats(&[1.0]).is_err());
    }

    #[test]
    fn balanced_labels_have_ln2_entropy() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<i8> = (0..20).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let c = class_overlap_stats(&TabularDataset::new("b", x, y).unwrap()).unwrap();
        assert!((c.class_entropy - 2f64.ln()).abs() < 1e-15);
        assert!((c.class_entropy - 0.6931).abs() < 1e-4);
    }

    fn dependent(m: usize, seed: u64) -> TabularDataset {
        let mut r = rng::substream(seed, "mf-dep", 0);
        let mut y: Vec<i8> = (0..m).map(|i| if i < m / 2 { 1 } else { -1 }).collect();
        y.shuffle(&mut r);
        let rows: Vec<Vec<f64>> = y.iter().map(|&l| vec![f64::from(u8::from(l > 0)), r.sample(StandardNormal)]).collect();
        TabularDataset::new("dep", Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn perfect_dependence_mi_equals_class_entropy() {
        let ds = dependent(200, 1);
        let classes: Vec<usize> = ds.labels.iter().map(|&l| usize::from(l > 0)).collect();
        let (mi, _) = mutual_information(&discretize(&ds.features.column(0), MMI_BINS), &classes, MMI_BINS);
        let h = class_overlap_stats(&ds).unwrap().class_entropy;
        assert!((mi - h).abs() < 1e-9);
    }

    #[test]
    fn shuffled_labels_lose_information() {
        let ds = dependent(400, 2);
        let before = class_overlap_stats(&ds).unwrap().mean_mutual_information;
        let mut shuffled = ds.clone();
        shuffled.labels.shuffle(&mut rng::substream(3, "mf-shuffle", 0));
        let after = class_overlap_stats(&shuffled).unwrap().mean_mutual_information;
        assert!(after < before);
    }

    #[test]
    fn center_of_gravity_matches_centroid_distance() {
        let mut r = rng::substream(4, "mf-cog", 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..2000 {
            let shift = if i % 2 == 0 { 3.0 } else { 0.0 };
            rows.push(vec![shift + r.sample::<f64, _>(StandardNormal), r.sample(StandardNormal)]);
            y.push(if i % 2 == 0 { 1 } else { -1 });
        }
        let ds = TabularDataset::new("cog", Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let c = class_overlap_stats(&ds).unwrap();
        assert!((c.center_of_gravity - 3.0).abs() < 0.15);
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = TabularDataset::new("one", Matrix::zeros(12, 2), vec![1; 12]).unwrap();
        assert!(class_overlap_stats(&ds).is_err());
        // extraction keeps going with sentinels
        let v = extract(&ds).unwrap();
        assert_eq!(v.is_valid("class_entropy"), Some(false));
        assert_eq!(v.get("class_entropy"), Some(0.0));
        assert_eq!(v.is_valid("skewness"), Some(false));
    }

    #[test]
    fn independent_gaussians_are_uncorrelated() {
        let mut r = rng::substream(5, "mf-indep", 0);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![r.sample(StandardNormal), r.sample(StandardNormal)]).collect();
        let y: Vec<i8> = (0..2000).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let v = extract(&TabularDataset::new("g", Matrix::from_rows(&rows).unwrap(), y).unwrap()).unwrap();
        assert!(v.get("mean_abs_correlation").unwrap() < 0.1);
    }

    #[test]
    fn duplicated_column_is_perfectly_correlated() {
        let mut r = rng::substream(6, "mf-dup", 0);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let v: f64 = r.sample(StandardNormal);
                vec![v, v]
            })
            .collect();
        let y: Vec<i8> = (0..50).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let v = extract(&TabularDataset::new("d", Matrix::from_rows(&rows).unwrap(), y).unwrap()).unwrap();
        assert!((v.get("mean_abs_correlation").unwrap() - 1.0).abs() < 1e-9);
        assert!((v.get("canonical_correlation_first").unwrap() - 2f64.sqrt()).abs() < 1e-9);
        assert!(v.get("canonical_correlation_last").unwrap() < 1e-6);
    }

    #[test]
    fn schema_is_total_for_every_pattern() {
        for p in PatternClass::ALL {
            let spec = PatternSpec { noise_dims: 3, ..PatternSpec::reference(p, 100, 7) };
            let v = extract(&gen_pattern(&spec).unwrap()).unwrap();
            assert_eq!(v.values.len(), SCHEMA.len());
            assert!(v.valid.iter().all(|&b| b), "{p}: {:?}", v.valid);
            assert!(v.values.iter().all(|x| x.is_finite()));
            assert_eq!(v.get("n"), Some(5.0));
        }
        assert!(matches!(extract(&TabularDataset::new("s", Matrix::zeros(4, 1), vec![1, -1, 1, -1]).unwrap()), Err(Error::Size(_))));
    }

    #[test]
    fn extract_all_preserves_order() {
        let ds: Vec<_> = (0..4).map(|s| gen_pattern(&PatternSpec::reference(PatternClass::C3, 60, s)).unwrap()).collect();
        let many = extract_all(&ds);
        for (d, v) in ds.iter().zip(many) {
            assert_eq!(v.unwrap(), extract(d).unwrap());
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(x in prop::collection::vec(-100.0f64..100.0, 2..500), p in 0.0f64..1.0) {
            let s = column_stats(&x).unwrap();
            let m2 = brute_moment(&x, 2);
            prop_assume!(m2 > 1e-6);
            prop_assert!((s.skewness.unwrap() - brute_moment(&x, 3) / m2.powf(1.5)).abs() < 1e-9);
            prop_assert!((s.kurtosis.unwrap() - brute_moment(&x, 4) / (m2 * m2)).abs() < 1e-9);
            let mu = x.iter().rev().sum::<f64>() / x.len() as f64;
            let mad = x.iter().map(|v| (v - mu).abs()).sum::<f64>() / x.len() as f64;
            prop_assert!((s.mad - mad).abs() < 1e-9);
            prop_assert!((s.q90 - brute_quantile(&x, 0.9)).abs() < 1e-9);
            prop_assert!((s.iqr - (brute_quantile(&x, 0.75) - brute_quantile(&x, 0.25))).abs() < 1e-9);
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert!((quantile_sorted(&sorted, p) - brute_quantile(&x, p)).abs() < 1e-9);
        }

        #[test]
        fn shift_and_scale(x in prop::collection::vec(-10.0f64..10.0, 3..200), shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
            let base = column_stats(&x).unwrap();
            prop_assume!(base.sd > 1e-3);
            let moved = column_stats(&x.iter().map(|v| v + shift).collect::<Vec<_>>()).unwrap();
            prop_assert!((moved.skewness.unwrap() - base.skewness.unwrap()).abs() < 1e-6);
            prop_assert!((moved.kurtosis.unwrap() - base.kurtosis.unwrap()).abs() < 1e-6);
            prop_assert!((moved.iqr - base.iqr).abs() < 1e-9);
            // the shifted-positive statistics only see x - min
            prop_assert!((moved.index_of_dispersion - base.index_of_dispersion).abs() < 1e-9);
            let scaled = column_stats(&x.iter().map(|v| v * scale).collect::<Vec<_>>()).unwrap();
            prop_assert!((scaled.skewness.unwrap() - base.skewness.unwrap()).abs() < 1e-9);
            prop_assert!((scaled.kurtosis.unwrap() - base.kurtosis.unwrap()).abs() < 1e-9);
            prop_assert!((scaled.sd - scale * base.sd).abs() < 1e-9 * scale.max(1.0) * base.sd.max(1.0));
            prop_assert!((scaled.mad - scale * base.mad).abs() < 1e-9 * scale.max(1.0) * base.mad.max(1.0));
            prop_assert!((scaled.iqr - scale * base.iqr).abs() < 1e-9 * scale.max(1.0) * base.iqr.max(1.0));
        }
    }
}
