use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::matrix::Matrix;

/// k nearest neighbours under Euclidean distance on z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub scaler: Standardizer,
    pub train: Matrix,
    pub labels: Vec<i8>,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, labels: &[i8], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        Self { train: scaler.apply(x), scaler, labels: labels.to_vec(), k: k.clamp(1, labels.len()) }
    }

    /// Fraction of positive labels among the k nearest training rows.
    /// Equal distances are broken by training-row order.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = vec![0.0; row.len()];
        self.scaler.apply_row(row, &mut z);
        let mut d: Vec<(f64, usize)> = (0..self.train.rows())
            .map(|i| (self.train.row(i).iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
        }
        let pos = d[..self.k].iter().filter(|&&(_, i)| self.labels[i] > 0).count();
        pos as f64 / self.k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_neighbour_returns_own_label() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, -1.0], vec![1.0, 5.0], vec![-2.0, 0.5]]).unwrap();
        let y = [1, -1, -1, 1];
        let model = KnnModel::fit(&x, &y, 1);
        assert_eq!(model.train.rows(), 4);
        for i in 0..4 {
            assert_eq!(model.score_row(x.row(i)), if y[i] > 0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn scores_are_multiples_of_one_over_k() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<i8> = (0..10).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let model = KnnModel::fit(&x, &y, 5);
        for q in [-1.0, 2.5, 4.0, 11.0] {
            let s = model.score_row(&[q]) * 5.0;
            assert!((s - s.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_distances_keep_lower_index() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        let model = KnnModel::fit(&x, &[1, -1, -1], 2);
        assert_eq!(model.score_row(&[0.0]), 0.5);
        assert_eq!(model.score_row(&[1e-9]), 0.0);
    }
}
