use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Column z-scoring fitted on training data. Zero-variance columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let m = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (acc, v) in mean.iter_mut().zip(x.row(i)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((acc, v), mu) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let sd = var.into_iter().map(|v| (v / m).sqrt()).collect();
        Self { mean, sd }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, v)) in out.iter_mut().zip(row).enumerate() {
            *o = if self.sd[j] > 1e-12 { (v - self.mean[j]) / self.sd[j] } else { 0.0 };
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let row = x.row(i).to_vec();
            self.apply_row(&row, out.row_mut(i));
        }
        out
    }
}
