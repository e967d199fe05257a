use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::matrix::Matrix;

const MAX_ITER: usize = 100;
const DEVIANCE_TOL: f64 = 1e-8;
const WEIGHT_FLOOR: f64 = 1e-10;

/// Unpenalised logistic regression on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub scaler: Standardizer,
    /// Slopes on the standardised scale.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub deviance: f64,
}

// log(1 + e^eta) without overflow
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn linear(z: &Matrix, coef: &[f64]) -> Vec<f64> {
    let n = z.cols();
    (0..z.rows())
        .map(|i| coef[n] + z.row(i).iter().zip(coef).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn deviance(eta: &[f64], y: &[f64]) -> f64 {
    2.0 * eta.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum::<f64>()
}

impl LogitModel {
    /// Iteratively reweighted least squares with step halving.
    pub fn fit(x: &Matrix, labels: &[i8]) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let z = scaler.apply(x);
        let (m, n) = (z.rows(), z.cols());
        let y: Vec<f64> = labels.iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect();
        let p = n + 1;

        let mut coef = vec![0.0; p];
        let mut eta = linear(&z, &coef);
        let mut dev = deviance(&eta, &y);
        for iter in 1..=MAX_ITER {
            let mut xtwx = Matrix::zeros(p, p);
            let mut xtwz = vec![0.0; p];
            let mut row = vec![1.0; p];
            for i in 0..m {
                row[..n].copy_from_slice(z.row(i));
                let mu = sigmoid(eta[i]);
                let w = (mu * (1.0 - mu)).max(WEIGHT_FLOOR);
                let work = eta[i] + (y[i] - mu) / w;
                for a in 0..p {
                    let wa = w * row[a];
                    xtwz[a] += wa * work;
                    for b in 0..=a {
                        xtwx[(a, b)] += wa * row[b];
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    xtwx[(b, a)] = xtwx[(a, b)];
                }
            }
            let mut next = solve_spd(&xtwx, &xtwz)?;
            let mut next_eta = linear(&z, &next);
            let mut next_dev = deviance(&next_eta, &y);
            let mut halvings = 0;
            while !(next_dev.is_finite() && next_dev <= dev * (1.0 + 1e-12) + 1e-12) {
                halvings += 1;
                if halvings > 30 {
                    return Err(Error::Convergence {
                        iterations: iter,
                        detail: format!("step halving failed at deviance {dev}"),
                    });
                }
                for (c, o) in next.iter_mut().zip(&coef) {
                    *c = 0.5 * (*c + o);
                }
                next_eta = linear(&z, &next);
                next_dev = deviance(&next_eta, &y);
            }
            let change = (next_dev - dev).abs() / (next_dev.abs() + 0.1);
            coef = next;
            eta = next_eta;
            dev = next_dev;
            if change < DEVIANCE_TOL {
                let intercept = coef[n];
                coef.truncate(n);
                return Ok(Self { scaler, beta: coef, intercept, iterations: iter, deviance: dev });
            }
        }
        Err(Error::Convergence { iterations: MAX_ITER, detail: format!("deviance still changing at {dev}") })
    }

    /// Linear predictor.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = vec![0.0; row.len()];
        self.scaler.apply_row(row, &mut z);
        self.intercept + z.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>()
    }
}
