use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng;

/// Bagged unpruned CART trees with random feature subsets at each split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub mtry: usize,
}

impl ForestModel {
    pub fn fit(x: &Matrix, labels: &[i8], n_trees: usize, mtry: usize, seed: u64) -> Result<Self> {
        let y: Vec<usize> = labels.iter().map(|&l| usize::from(l > 0)).collect();
        let m = x.rows();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::substream(seed, "forest-tree", t as u64);
                let idx: Vec<usize> = (0..m).map(|_| r.random_range(0..m)).collect();
                let xb = x.select_rows(&idx);
                let yb: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
                DecisionTree::fit(&xb, &yb, 2, TreeParams { cp: 0.0, mtry: Some(mtry) }, Some(&mut r))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees, mtry })
    }

    /// Share of trees voting for the positive class.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        votes as f64 / self.trees.len() as f64
    }
}
