//! Fixed-size "image" view of a tabular dataset.
//!
//! Feature columns are standardised (population sd, zero-variance columns
//! become zeros) and placed left-aligned; the +/-1 label sits in the last
//! column. Datasets with more features than fit are first projected onto
//! their leading principal components.
//!
//! Two row strategies:
//!
//! * `sort-resample`: rows sorted lexicographically by (label, col 0, col 1, ...),
//!   then decimated to `R` rows at indices `floor(i * m / R)` or zero-padded.
//! * `pca-compact`: rows are `sigma_k * v_k^T` from the SVD of the standardised
//!   feature block augmented with the label column; remaining rows are zero.
//!   The label column then holds each right singular vector's label coordinate.
//!
//! All computations run on rows in a canonical order, so shuffling the input
//! rows leaves the output bit-identical.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CanonStrategy {
    PcaCompact,
    #[default]
    SortResample,
}

impl fmt::Display for CanonStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CanonStrategy::PcaCompact => "pca-compact",
            CanonStrategy::SortResample => "sort-resample",
        })
    }
}

impl FromStr for CanonStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pca-compact" => Ok(CanonStrategy::PcaCompact),
            "sort-resample" => Ok(CanonStrategy::SortResample),
            other => Err(Error::Validation(format!("unknown canonicalization strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonSpec {
    pub rows: usize,
    pub cols: usize,
    pub strategy: CanonStrategy,
    /// Project surplus feature columns onto principal components instead of failing.
    pub reduce_columns: bool,
}

impl CanonSpec {
    pub fn new(rows: usize, cols: usize, strategy: CanonStrategy) -> Self {
        Self { rows, cols, strategy, reduce_columns: true }
    }

    /// 1099 x 7, the size used for the full-scale experiments.
    pub fn full_scale() -> Self {
        Self::new(1099, 7, CanonStrategy::SortResample)
    }

    /// 128 x 7, small enough to train on a workstation CPU.
    pub fn desk() -> Self {
        Self::new(128, 7, CanonStrategy::SortResample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::Validation("canonical row count must be positive".into()));
        }
        if self.cols < 3 {
            return Err(Error::Validation(format!("canonical width must be at least 3, got {}", self.cols)));
        }
        Ok(())
    }
}

impl Default for CanonSpec {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalImage {
    pub pixels: Matrix,
    pub source_m: usize,
    pub source_n: usize,
    pub strategy: CanonStrategy,
}

impl CanonicalImage {
    /// Reads the image back as a dataset (all feature columns, label column as labels).
    /// Fails if any row carries a zero label, i.e. the image contains padding.
    pub fn to_dataset(&self, name: &str) -> Result<TabularDataset> {
        let c = self.pixels.cols();
        let mut x = Matrix::zeros(self.pixels.rows(), c - 1);
        let mut labels = Vec::with_capacity(self.pixels.rows());
        for i in 0..self.pixels.rows() {
            let row = self.pixels.row(i);
            x.row_mut(i).copy_from_slice(&row[..c - 1]);
            let y = row[c - 1];
            labels.push(if y == 1.0 {
                1
            } else if y == -1.0 {
                -1
            } else {
                return Err(Error::Validation(format!("row {i} has label value {y}")));
            });
        }
        TabularDataset::new(name, x, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Centred data times loadings, rows x k.
    pub scores: Matrix,
    /// Orthonormal columns, cols x k.
    pub loadings: Matrix,
    /// Population-covariance eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Set when fewer than the requested components were returned.
    pub truncated: bool,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Rotates each eigenvector so that its largest-magnitude entry is positive.
fn fix_signs(vectors: &mut Matrix) {
    for k in 0..vectors.cols() {
        let mut best = 0usize;
        for i in 1..vectors.rows() {
            if vectors[(i, k)].abs() > vectors[(best, k)].abs() {
                best = i;
            }
        }
        if vectors[(best, k)] < 0.0 {
            for i in 0..vectors.rows() {
                vectors[(i, k)] = -vectors[(i, k)];
            }
        }
    }
}

fn gram(x: &Matrix) -> Matrix {
    let n = x.cols();
    let mut g = Matrix::zeros(n, n);
    for i in 0..x.rows() {
        let r = x.row(i);
        for a in 0..n {
            for b in a..n {
                g[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

/// Principal components of `x` (rows are observations).
pub fn pca_project(x: &Matrix, k: usize) -> Result<PcaResult> {
    let (m, n) = (x.rows(), x.cols());
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::Validation(format!("PCA needs a non-empty matrix and k > 0 (got {m}x{n}, k={k})")));
    }
    if !x.is_finite() {
        return Err(Error::Validation("PCA input contains non-finite values".into()));
    }
    let mut centred = x.clone();
    for j in 0..n {
        let mean = x.column(j).iter().sum::<f64>() / m as f64;
        for i in 0..m {
            centred[(i, j)] -= mean;
        }
    }
    let mut cov = gram(&centred);
    for v in cov.as_mut_slice() {
        *v /= m as f64;
    }
    let (vals, mut vecs) = symmetric_eigen(&cov)?;
    fix_signs(&mut vecs);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let tol = (m.max(n) as f64) * f64::EPSILON * lmax.max(f64::MIN_POSITIVE);
    let rank = vals.iter().filter(|&&v| v > tol).count();
    let keep = k.min(rank);
    let truncated = keep < k;
    let mut loadings = Matrix::zeros(n, keep);
    for j in 0..keep {
        for i in 0..n {
            loadings[(i, j)] = vecs[(i, j)];
        }
    }
    let scores = centred.matmul(&loadings)?;
    Ok(PcaResult { scores, loadings, eigenvalues: vals[..keep].to_vec(), truncated })
}

/// Column-standardises in place; sums are taken over sorted values so the
/// result does not depend on row order.
fn standardize_columns(x: &mut Matrix) {
    let m = x.rows();
    for j in 0..x.cols() {
        let mut col = x.column(j);
        col.sort_by(f64::total_cmp);
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        let sd = var.sqrt();
        let degenerate = !(sd > 1e-12 * mean.abs().max(1.0));
        for i in 0..m {
            x[(i, j)] = if degenerate { 0.0 } else { (x[(i, j)] - mean) / sd };
        }
    }
}

fn sort_rows(rows: &mut [Vec<f64>]) {
    rows.sort_by(|a, b| lex_cmp(a, b));
}

/// Converts a dataset into a `spec.rows x spec.cols` canonical image.
pub fn canonicalize(ds: &TabularDataset, spec: &CanonSpec) -> Result<CanonicalImage> {
    spec.validate()?;
    ds.validate()?;
    let (m, n) = (ds.m(), ds.n());
    if m == 0 {
        return Err(Error::Validation("cannot canonicalize an empty dataset".into()));
    }
    let width = spec.cols - 1;
    if n > width && !spec.reduce_columns {
        return Err(Error::Size(format!("{n} features plus label exceed canonical width {}", spec.cols)));
    }

    // canonical row order: (label, raw features)
    let mut raw: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = Vec::with_capacity(n + 1);
            r.push(f64::from(ds.labels[i]));
            r.extend_from_slice(ds.features.row(i));
            r
        })
        .collect();
    sort_rows(&mut raw);
    let labels: Vec<f64> = raw.iter().map(|r| r[0]).collect();
    let mut feats = Matrix::zeros(m, n);
    for (i, r) in raw.iter().enumerate() {
        feats.row_mut(i).copy_from_slice(&r[1..]);
    }
    standardize_columns(&mut feats);

    if n > width {
        let pca = pca_project(&feats, width)?;
        let mut reduced = Matrix::zeros(m, width);
        for i in 0..m {
            reduced.row_mut(i)[..pca.scores.cols()].copy_from_slice(pca.scores.row(i));
        }
        standardize_columns(&mut reduced);
        feats = reduced;
    }
    let used = feats.cols();

    let mut pixels = Matrix::zeros(spec.rows, spec.cols);
    match spec.strategy {
        CanonStrategy::SortResample => {
            let mut rows: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut r = Vec::with_capacity(used + 1);
                    r.push(labels[i]);
                    r.extend_from_slice(feats.row(i));
                    r
                })
                .collect();
            sort_rows(&mut rows);
            let take: Vec<usize> = if m > spec.rows {
                (0..spec.rows).map(|i| i * m / spec.rows).collect()
            } else {
                (0..m).collect()
            };
            for (dst, &src) in take.iter().enumerate() {
                let r = &rows[src];
                let out = pixels.row_mut(dst);
                out[..used].copy_from_slice(&r[1..]);
                out[spec.cols - 1] = r[0];
            }
        }
        CanonStrategy::PcaCompact => {
            let mut z = Matrix::zeros(m, used + 1);
            for i in 0..m {
                let r = z.row_mut(i);
                r[..used].copy_from_slice(feats.row(i));
                r[used] = labels[i];
            }
            let (vals, mut vecs) = symmetric_eigen(&gram(&z))?;
            fix_signs(&mut vecs);
            let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
            let tol = (m.max(used + 1) as f64) * f64::EPSILON * lmax;
            let rank = vals.iter().filter(|&&v| v > tol).count();
            for k in 0..rank.min(spec.rows) {
                let sigma = vals[k].sqrt();
                let out = pixels.row_mut(k);
                for j in 0..used {
                    out[j] = sigma * vecs[(j, k)];
                }
                out[spec.cols - 1] = sigma * vecs[(used, k)];
            }
        }
    }
    Ok(CanonicalImage { pixels, source_m: m, source_n: n, strategy: spec.strategy })
}
