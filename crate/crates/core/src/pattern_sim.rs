//! Seeded generators for the five two-class training patterns.
//!
//! Geometries (informative columns x, y):
//!
//! * C1 linear: Gaussians centred at `(±d/2, 0)`, `d = 0.6 * (1 - overlap)`,
//!   with correlation 0.9 between the two coordinates so the best linear
//!   direction differs from the mean difference.
//! * C2 XOR: Gaussians on the corners of the unit square, `(0,0)` and `(1,1)`
//!   positive, `(1,0)` and `(0,1)` negative, corners pulled toward `(0.5, 0.5)`
//!   by `overlap`. 62% of the positives sit at `(0,0)`.
//! * C3 two moons: positive outer arc `(cos t, sin t)`, negative inner arc
//!   `(1 - cos t, 1 - sin t - v)` with `v = 0.5 * (1 - overlap)`, `t ~ U(0, π)`.
//! * C4 sandwich: positive band at `v = 0` between negative bands at
//!   `v = ±d`, `d = 1.0 * (1 - overlap)`, bands elongated along u with
//!   spread 1.5; 66% of the negatives in the upper band; the frame is rotated
//!   by 45 degrees.
//! * C5 quadratic: nested parabolas `y = 1.2 x² ± g/2`, positive on top,
//!   `g = 1.7 * (1 - overlap)`, `x ~ U(-1.5, 1.5)`.
//!
//! `noise_sd` is the Gaussian spread of every component (perpendicular
//! spread for C4). Irrelevant columns are standard Gaussian and follow the
//! two informative ones. Each class receives exactly `m / 2` rows and the
//! rows are shuffled. Finally every column can be shifted and rescaled by
//! per-column random amounts (`shift_sd`, `log_scale_sd`), which moves the
//! Gaussians around without changing the geometry seen after standardising.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{PatternClass, TabularDataset};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{self, mix64};

pub const MAX_NOISE_DIMS: usize = 4;
pub const CORPUS_SHIFT_SD: f64 = 2.0;
pub const CORPUS_LOG_SCALE_SD: f64 = 0.7;

const C1_SEPARATION: f64 = 0.6;
const C1_CORRELATION: f64 = 0.9;
const C2_POSITIVE_SPLIT: f64 = 0.62;
const C3_OFFSET: f64 = 0.5;
const C4_SEPARATION: f64 = 1.0;
const C4_BAND_SD: f64 = 1.5;
const C4_UPPER_SPLIT: f64 = 0.66;
const C4_ROTATION: f64 = std::f64::consts::FRAC_PI_4;
const C5_HALF_WIDTH: f64 = 1.5;
const C5_CURVATURE: f64 = 1.2;
const C5_GAP: f64 = 1.7;

impl PatternClass {
    /// Spread used by the reference fixtures and as the unit for corpus noise.
    pub fn reference_noise(self) -> f64 {
        match self {
            PatternClass::C1 => 0.65,
            PatternClass::C2 => 0.39,
            PatternClass::C3 => 0.28,
            PatternClass::C4 => 0.3,
            PatternClass::C5 => 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub pattern: PatternClass,
    pub m: usize,
    pub noise_sd: f64,
    pub overlap: f64,
    pub noise_dims: usize,
    /// Spread of the per-column random shift; 0 leaves columns in place.
    pub shift_sd: f64,
    /// Spread of the per-column log scale factor; 0 leaves columns unscaled.
    pub log_scale_sd: f64,
    pub seed: u64,
}

impl PatternSpec {
    /// Reference fixture: the pattern's reference spread, no overlap, no noise columns.
    pub fn reference(pattern: PatternClass, m: usize, seed: u64) -> Self {
        Self { pattern, m, noise_sd: pattern.reference_noise(), overlap: 0.0, noise_dims: 0, shift_sd: 0.0, log_scale_sd: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m % 2 != 0 {
            return invalid(format!("sample count must be positive and even, got {}", self.m));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return invalid(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return invalid(format!("overlap must lie in [0, 1], got {}", self.overlap));
        }
        if self.noise_dims > MAX_NOISE_DIMS {
            return invalid(format!("at most {MAX_NOISE_DIMS} noise columns, got {}", self.noise_dims));
        }
        for (name, v) in [("shift_sd", self.shift_sd), ("log_scale_sd", self.log_scale_sd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Distance between the two class means implied by the geometry (C1 only
    /// has a single centroid per class; other patterns report 0 or the
    /// distance between mixture means).
    pub fn separation(&self) -> f64 {
        let shrink = 1.0 - self.overlap;
        match self.pattern {
            PatternClass::C1 => C1_SEPARATION * shrink,
            PatternClass::C4 => {
                let d = C4_SEPARATION * shrink;
                ((2.0 * C4_UPPER_SPLIT - 1.0) * d).abs()
            }
            _ => 0.0,
        }
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Splits `count` into two parts with the first receiving `share` of it.
fn split(count: usize, share: f64) -> (usize, usize) {
    let a = ((count as f64) * share).round() as usize;
    let a = a.min(count);
    (a, count - a)
}

fn informative_points<R: Rng + ?Sized>(spec: &PatternSpec, rng: &mut R) -> Vec<([f64; 2], i8)> {
    let half = spec.m / 2;
    let s = spec.noise_sd;
    let shrink = 1.0 - spec.overlap;
    let mut out = Vec::with_capacity(spec.m);
    match spec.pattern {
        PatternClass::C1 => {
            let c = C1_SEPARATION * shrink / 2.0;
            let rho = C1_CORRELATION;
            let tail = (1.0 - rho * rho).sqrt();
            for (label, centre) in [(1i8, c), (-1i8, -c)] {
                for _ in 0..half {
                    let (a, b) = (gauss(rng), gauss(rng));
                    out.push(([centre + s * a, s * (rho * a + tail * b)], label));
                }
            }
        }
        PatternClass::C2 => {
            let corner = |v: f64| 0.5 + (v - 0.5) * shrink;
            let (pa, pb) = split(half, C2_POSITIVE_SPLIT);
            let (na, nb) = split(half, 0.5);
            let comps = [
                ([corner(0.0), corner(0.0)], 1i8, pa),
                ([corner(1.0), corner(0.0)], -1i8, na),
                ([corner(0.0), corner(1.0)], -1i8, nb),
                ([corner(1.0), corner(1.0)], 1i8, pb),
            ];
            for (c, label, count) in comps {
                for _ in 0..count {
                    out.push(([c[0] + s * gauss(rng), c[1] + s * gauss(rng)], label));
                }
            }
        }
        PatternClass::C3 => {
            let v = C3_OFFSET * shrink;
            for _ in 0..half {
                let t = rng.random::<f64>() * std::f64::consts::PI;
                out.push(([t.cos() + s * gauss(rng), t.sin() + s * gauss(rng)], 1));
            }
            for _ in 0..half {
                let t = rng.random::<f64>() * std::f64::consts::PI;
                out.push(([1.0 - t.cos() + s * gauss(rng), 1.0 - t.sin() - v + s * gauss(rng)], -1));
            }
        }
        PatternClass::C4 => {
            let d = C4_SEPARATION * shrink;
            let (upper, lower) = split(half, C4_UPPER_SPLIT);
            let (c, sn) = (C4_ROTATION.cos(), C4_ROTATION.sin());
            let mut push = |u: f64, v: f64, l: i8| out.push(([c * u - sn * v, sn * u + c * v], l));
            for _ in 0..half {
                push(C4_BAND_SD * gauss(rng), s * gauss(rng), 1);
            }
            for (centre, count) in [(d, upper), (-d, lower)] {
                for _ in 0..count {
                    push(C4_BAND_SD * gauss(rng), centre + s * gauss(rng), -1);
                }
            }
        }
        PatternClass::C5 => {
            let g = C5_GAP * shrink / 2.0;
            for (offset, label) in [(g, 1i8), (-g, -1i8)] {
                for _ in 0..half {
                    let x = (2.0 * rng.random::<f64>() - 1.0) * C5_HALF_WIDTH;
                    let y = C5_CURVATURE * x * x + offset;
                    out.push(([x + s * gauss(rng), y + s * gauss(rng)], label));
                }
            }
        }
    }
    out
}

/// Generates one balanced dataset. Output depends only on `spec`.
pub fn gen_pattern(spec: &PatternSpec) -> Result<TabularDataset> {
    spec.validate()?;
    let mut rng = rng::substream(spec.seed, "pattern", 0);
    let mut points = informative_points(spec, &mut rng);
    points.shuffle(&mut rng);

    let n = 2 + spec.noise_dims;
    let mut x = Matrix::zeros(spec.m, n);
    let mut labels = Vec::with_capacity(spec.m);
    for (i, (p, y)) in points.iter().enumerate() {
        let row = x.row_mut(i);
        row[0] = p[0];
        row[1] = p[1];
        for v in &mut row[2..] {
            *v = gauss(&mut rng);
        }
        labels.push(*y);
    }
    if spec.shift_sd > 0.0 || spec.log_scale_sd > 0.0 {
        let mut r = rng::substream(spec.seed, "column-jitter", 0);
        for j in 0..n {
            let scale = (spec.log_scale_sd * gauss(&mut r)).exp();
            let shift = spec.shift_sd * gauss(&mut r);
            for i in 0..spec.m {
                x[(i, j)] = x[(i, j)] * scale + shift;
            }
        }
    }
    let name = format!("{}-m{}-s{}", spec.pattern, spec.m, spec.seed);
    Ok(TabularDataset::new(name, x, labels)?.with_pattern(spec.pattern))
}

/// Parameter ranges for a heterogeneous corpus. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub per_class: usize,
    pub m_range: (usize, usize),
    pub noise_dims_range: (usize, usize),
    /// Multiplier on each pattern's reference spread, drawn uniformly.
    pub noise_scale_range: (f64, f64),
    pub overlap_range: (f64, f64),
    /// Per-column jitter applied to every generated dataset.
    pub shift_sd: f64,
    pub log_scale_sd: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(per_class: usize, m_range: (usize, usize), noise_dims_range: (usize, usize), seed: u64) -> Self {
        Self {
            per_class,
            m_range,
            noise_dims_range,
            noise_scale_range: (0.6, 1.4),
            overlap_range: (0.0, 0.3),
            shift_sd: CORPUS_SHIFT_SD,
            log_scale_sd: CORPUS_LOG_SCALE_SD,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 {
            return invalid("per_class must be at least 1");
        }
        let (lo, hi) = self.m_range;
        if lo > hi {
            return invalid(format!("empty sample-size range [{lo}, {hi}]"));
        }
        if lo < 4 || hi > 1_000_000 {
            return invalid(format!("sample-size range [{lo}, {hi}] outside [4, 1000000]"));
        }
        let (a, b) = self.noise_dims_range;
        if a > b {
            return invalid(format!("empty noise-dimension range [{a}, {b}]"));
        }
        if b > MAX_NOISE_DIMS {
            return invalid(format!("noise-dimension range [{a}, {b}] exceeds {MAX_NOISE_DIMS}"));
        }
        let (s0, s1) = self.noise_scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return invalid(format!("bad noise scale range [{s0}, {s1}]"));
        }
        if !(self.shift_sd >= 0.0 && self.shift_sd.is_finite() && self.log_scale_sd >= 0.0 && self.log_scale_sd.is_finite()) {
            return invalid("column jitter spreads must be finite and non-negative");
        }
        let (o0, o1) = self.overlap_range;
        if !(0.0 <= o0 && o0 <= o1 && o1 <= 1.0) {
            return invalid(format!("bad overlap range [{o0}, {o1}]"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.per_class * PatternClass::COUNT
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lazily yields every dataset spec in corpus order.
    pub fn specs(&self) -> impl Iterator<Item = PatternSpec> + '_ {
        (0..self.len()).map(|i| self.dataset_spec(i))
    }

    /// Spec for the `index`-th dataset. Patterns cycle C1..C5.
    pub fn dataset_spec(&self, index: usize) -> PatternSpec {
        let pattern = PatternClass::ALL[index % PatternClass::COUNT];
        let mut rng = rng::substream(self.seed, "corpus-params", index as u64);
        let (lo, hi) = self.m_range;
        // even sample counts keep classes exactly balanced
        let lo_even = lo.div_ceil(2) * 2;
        let hi_even = (hi / 2) * 2;
        let m = if hi_even <= lo_even { lo_even.max(2) } else { 2 * rng.random_range(lo_even / 2..=hi_even / 2) };
        let noise_dims = rng.random_range(self.noise_dims_range.0..=self.noise_dims_range.1);
        let (s0, s1) = self.noise_scale_range;
        let scale = s0 + (s1 - s0) * rng.random::<f64>();
        let (o0, o1) = self.overlap_range;
        let overlap = o0 + (o1 - o0) * rng.random::<f64>();
        PatternSpec {
            pattern,
            m,
            noise_sd: pattern.reference_noise() * scale,
            overlap,
            noise_dims,
            shift_sd: self.shift_sd,
            log_scale_sd: self.log_scale_sd,
            seed: mix64(rng::derive_seed(self.seed, "corpus-dataset").wrapping_add(index as u64)),
        }
    }
}

/// Generates `5 * per_class` datasets, `per_class` of each pattern, in
/// parallel. The result equals sequential generation.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Vec<TabularDataset>> {
    spec.validate()?;
    (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let ds = gen_pattern(&spec.dataset_spec(i))?;
            Ok(TabularDataset { name: format!("ds{i:05}"), ..ds })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroid(ds: &TabularDataset, label: i8) -> [f64; 2] {
        let mut c = [0.0; 2];
        let mut k = 0.0;
        for i in 0..ds.m() {
            if ds.labels[i] == label {
                c[0] += ds.features[(i, 0)];
                c[1] += ds.features[(i, 1)];
                k += 1.0;
            }
        }
        [c[0] / k, c[1] / k]
    }

    #[test]
    fn linear_dataset_shape_and_balance() {
        let spec = PatternSpec { pattern: PatternClass::C1, m: 1000, noise_sd: 0.5, overlap: 0.0, noise_dims: 0, shift_sd: 0.0, log_scale_sd: 0.0, seed: 7 };
        let ds = gen_pattern(&spec).unwrap();
        assert_eq!((ds.m(), ds.n()), (1000, 2));
        assert_eq!(ds.class_counts(), (500, 500));
        assert_eq!(ds.pattern, Some(PatternClass::C1));
    }

    #[test]
    fn zero_noise_xor_is_four_corners() {
        let spec = PatternSpec { pattern: PatternClass::C2, m: 4, noise_sd: 1e-12, overlap: 0.0, noise_dims: 0, shift_sd: 0.0, log_scale_sd: 0.0, seed: 1 };
        let ds = gen_pattern(&spec).unwrap();
        let mut pts: Vec<(i64, i64, i8)> = (0..4)
            .map(|i| (ds.features[(i, 0)].round() as i64, ds.features[(i, 1)].round() as i64, ds.labels[i]))
            .collect();
        pts.sort();
        assert_eq!(pts, vec![(0, 0, 1), (0, 1, -1), (1, 0, -1), (1, 1, 1)]);
        for i in 0..4 {
            for j in 0..2 {
                let v = ds.features[(i, j)];
                assert!((v - v.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_centroid_distance_matches_configuration() {
        for seed in [3u64, 11, 29] {
            let spec = PatternSpec { pattern: PatternClass::C1, m: 2000, noise_sd: 0.3, overlap: 0.0, noise_dims: 0, shift_sd: 0.0, log_scale_sd: 0.0, seed };
            let ds = gen_pattern(&spec).unwrap();
            let (a, b) = (centroid(&ds, 1), centroid(&ds, -1));
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let tol = 4.0 * 0.3 / 1000f64.sqrt();
            assert!((dist - spec.separation()).abs() <= tol, "seed {seed}: {dist} vs {}", spec.separation());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = PatternSpec::reference(PatternClass::C3, 10, 0);
        assert!(gen_pattern(&PatternSpec { m: 9, ..base }).is_err());
        assert!(gen_pattern(&PatternSpec { m: 0, ..base }).is_err());
        assert!(gen_pattern(&PatternSpec { noise_sd: 0.0, ..base }).is_err());
        assert!(gen_pattern(&PatternSpec { noise_sd: -1.0, ..base }).is_err());
        assert!(gen_pattern(&PatternSpec { noise_dims: 5, ..base }).is_err());
        assert!(gen_pattern(&PatternSpec { overlap: 1.5, ..base }).is_err());
    }

    #[test]
    fn generator_is_pure() {
        for p in PatternClass::ALL {
            let spec = PatternSpec { noise_dims: 3, ..PatternSpec::reference(p, 120, 99) };
            let a = gen_pattern(&spec).unwrap();
            let b = gen_pattern(&spec).unwrap();
            assert_eq!(a, b);
            let c = gen_pattern(&PatternSpec { seed: 100, ..spec }).unwrap();
            assert_ne!(a.features, c.features);
        }
    }

    #[test]
    fn noise_columns_independent_of_label() {
        for p in PatternClass::ALL {
            let spec = PatternSpec { noise_dims: 4, ..PatternSpec::reference(p, 800, 5) };
            let ds = gen_pattern(&spec).unwrap();
            let y: Vec<f64> = ds.labels.iter().map(|&v| f64::from(v)).collect();
            for j in 2..ds.n() {
                let x = ds.features.column(j);
                let r = pearson(&x, &y).abs();
                assert!(r < 0.15, "{p} column {j}: |r| = {r}");
            }
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let spec = CorpusSpec::new(3, (40, 60), (0, 4), 17);
        let a = gen_corpus(&spec).unwrap();
        assert_eq!(a.len(), 15);
        for p in PatternClass::ALL {
            assert_eq!(a.iter().filter(|d| d.pattern == Some(p)).count(), 3);
        }
        for d in &a {
            assert!((40..=60).contains(&d.m()));
            assert!((2..=6).contains(&d.n()));
            let (neg, pos) = d.class_counts();
            assert_eq!(neg, pos);
        }
        let b = gen_corpus(&spec).unwrap();
        assert_eq!(a, b);
        let sequential: Vec<TabularDataset> = (0..15)
            .map(|i| TabularDataset { name: format!("ds{i:05}"), ..gen_pattern(&spec.dataset_spec(i)).unwrap() })
            .collect();
        assert_eq!(a, sequential);
    }

    #[test]
    fn full_scale_corpus_size() {
        let spec = CorpusSpec::new(10_000, (800, 1400), (0, 4), 1);
        spec.validate().unwrap();
        assert_eq!(spec.len(), 50_000);
        let mut per = [0usize; 5];
        for s in spec.specs() {
            per[s.pattern.index()] += 1;
            assert!((800..=1400).contains(&s.m) && s.m % 2 == 0);
            assert!(s.noise_dims <= 4);
        }
        assert_eq!(per, [10_000; 5]);
    }

    #[test]
    fn singleton_corpus_ranges() {
        let a = gen_corpus(&CorpusSpec::new(1, (100, 100), (0, 0), 3)).unwrap();
        assert_eq!(a.len(), 5);
        for (d, p) in a.iter().zip(PatternClass::ALL) {
            assert_eq!((d.m(), d.n(), d.pattern), (100, 2, Some(p)));
        }
    }

    #[test]
    fn corpus_rejects_empty_ranges() {
        assert!(gen_corpus(&CorpusSpec::new(1, (10, 5), (0, 0), 0)).is_err());
        assert!(gen_corpus(&CorpusSpec::new(1, (10, 20), (3, 1), 0)).is_err());
        assert!(gen_corpus(&CorpusSpec::new(0, (10, 20), (0, 1), 0)).is_err());
        assert!(gen_corpus(&CorpusSpec::new(1, (10, 20), (0, 5), 0)).is_err());
        assert!(gen_corpus(&CorpusSpec::new(1, (2, 20), (0, 1), 0)).is_err());
    }
}
