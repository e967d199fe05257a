use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::matrix::Matrix;
use crate::rng;

pub const ANN_ITERATIONS: usize = 500;
const INIT_RANGE: f64 = 0.7;
const INITIAL_STEP: f64 = 0.1;
const MAX_STEP: f64 = 0.15;

/// One hidden layer of logistic units feeding a logistic output.
///
/// Parameters are packed as `[W1 (hidden x n), b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub scaler: Standardizer,
    pub hidden: usize,
    pub decay: f64,
    pub theta: Vec<f64>,
    pub objective: f64,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

struct Problem<'a> {
    z: &'a Matrix,
    y: &'a [f64],
    hidden: usize,
    decay: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.z.cols()
    }

    /// (cross-entropy + decay * |theta|^2) / m and its gradient
    fn eval(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (h, n, m) = (self.hidden, self.n(), self.z.rows());
        let (w1, rest) = theta.split_at(h * n);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let mut a = vec![0.0; h];
        let mut loss = 0.0;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.fill(0.0);
        }
        for i in 0..m {
            let x = self.z.row(i);
            for j in 0..h {
                let pre = b1[j] + w1[j * n..(j + 1) * n].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                a[j] = sigmoid(pre);
            }
            let out = b2[0] + w2.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
            loss += softplus(out) - self.y[i] * out;
            if let Some(g) = g.as_deref_mut() {
                let d_out = sigmoid(out) - self.y[i];
                let (gw1, rest) = g.split_at_mut(h * n);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h);
                gb2[0] += d_out;
                for j in 0..h {
                    gw2[j] += d_out * a[j];
                    let d_a = d_out * w2[j] * a[j] * (1.0 - a[j]);
                    gb1[j] += d_a;
                    for (gw, v) in gw1[j * n..(j + 1) * n].iter_mut().zip(x) {
                        *gw += d_a * v;
                    }
                }
            }
        }
        let penalty: f64 = theta.iter().map(|t| t * t).sum();
        if let Some(g) = g {
            for (gi, t) in g.iter_mut().zip(theta) {
                *gi = (*gi + 2.0 * self.decay * t) / m as f64;
            }
        }
        (loss + self.decay * penalty) / m as f64
    }
}

impl AnnModel {
    /// Full-batch gradient descent; each step starts from twice the last
    /// accepted rate (capped at `MAX_STEP`) and halves until the objective
    /// decreases. The small cap keeps the fit close to a linear model within
    /// the iteration budget.
    pub fn fit(x: &Matrix, labels: &[i8], hidden: usize, decay: f64, seed: u64) -> Self {
        let scaler = Standardizer::fit(x);
        let z = scaler.apply(x);
        let y: Vec<f64> = labels.iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect();
        let problem = Problem { z: &z, y: &y, hidden, decay };
        let len = hidden * (z.cols() + 2) + 1;
        let mut r = rng::substream(seed, "ann-init", 0);
        let mut theta: Vec<f64> = (0..len).map(|_| r.random_range(-INIT_RANGE..INIT_RANGE)).collect();
        let mut grad = vec![0.0; len];
        let mut trial = vec![0.0; len];
        let mut f = problem.eval(&theta, Some(&mut grad));
        let mut rate = INITIAL_STEP;
        for _ in 0..ANN_ITERATIONS {
            let mut step = (rate * 2.0).min(MAX_STEP);
            let accepted = loop {
                for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                    *t = th - step * g;
                }
                let ft = problem.eval(&trial, None);
                if ft < f {
                    break Some(ft);
                }
                step *= 0.5;
                if step < 1e-12 {
                    break None;
                }
            };
            let Some(ft) = accepted else { break };
            std::mem::swap(&mut theta, &mut trial);
            rate = step;
            f = ft;
            problem.eval(&theta, Some(&mut grad));
        }
        Self { scaler, hidden, decay, theta, objective: f }
    }

    /// Output-unit pre-activation.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let n = row.len();
        let h = self.hidden;
        let mut z = vec![0.0; n];
        self.scaler.apply_row(row, &mut z);
        let (w1, rest) = self.theta.split_at(h * n);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        b2[0]
            + (0..h)
                .map(|j| w2[j] * sigmoid(b1[j] + w1[j * n..(j + 1) * n].iter().zip(&z).map(|(w, v)| w * v).sum::<f64>()))
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let z = Matrix::from_rows(&[vec![0.3, -1.2], vec![1.5, 0.2], vec![-0.7, 0.9], vec![0.1, 0.1]]).unwrap();
        let y = [1.0, 0.0, 1.0, 0.0];
        let p = Problem { z: &z, y: &y, hidden: 3, decay: 0.1 };
        let theta: Vec<f64> = (0..13).map(|i| ((i * 7 % 11) as f64 - 5.0) / 7.0).collect();
        let mut g = vec![0.0; 13];
        p.eval(&theta, Some(&mut g));
        for k in 0..13 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += 1e-6;
            tm[k] -= 1e-6;
            let num = (p.eval(&tp, None) - p.eval(&tm, None)) / 2e-6;
            assert!((num - g[k]).abs() < 1e-7, "{k}: {num} vs {}", g[k]);
        }
    }

    #[test]
    fn objective_decreases_and_fits_a_threshold() {
        let x = Matrix::from_rows(&(0..40).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<i8> = (0..40).map(|i| if i >= 20 { 1 } else { -1 }).collect();
        let model = AnnModel::fit(&x, &y, 1, 0.0, 3);
        assert!(model.score_row(&[35.0]) > model.score_row(&[5.0]));
        assert!(model.objective < 0.2);
        assert_eq!(model, AnnModel::fit(&x, &y, 1, 0.0, 3));
    }
}
