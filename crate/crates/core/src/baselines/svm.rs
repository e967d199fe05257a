use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MAX_UPDATES: usize = 1_000_000;
const TAU: f64 = 1e-12;
const CACHE_ENTRIES: usize = 1 << 24;

/// Soft-margin kernel SVM with a Gaussian kernel on z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub scaler: Standardizer,
    pub c: f64,
    pub sigma: f64,
    pub support: Matrix,
    /// alpha_i * y_i for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Maximal KKT violation at exit.
    pub kkt_gap: f64,
    pub updates: usize,
}

fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d).exp()
}

/// Kernel rows computed on demand, least recently used rows evicted.
struct KernelCache<'a> {
    z: &'a Matrix,
    gamma: f64,
    rows: Vec<Option<Rc<Vec<f64>>>>,
    last_used: Vec<u64>,
    clock: u64,
    cached: usize,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(z: &'a Matrix, gamma: f64) -> Self {
        let m = z.rows();
        Self {
            z,
            gamma,
            rows: vec![None; m],
            last_used: vec![0; m],
            clock: 0,
            cached: 0,
            capacity: (CACHE_ENTRIES / m.max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&k| self.rows[k].is_some() && k != i)
                .min_by_key(|&k| self.last_used[k])
                .expect("cache is non-empty");
            self.rows[victim] = None;
            self.cached -= 1;
        }
        let zi = self.z.row(i);
        let r = Rc::new((0..self.z.rows()).map(|k| rbf(zi, self.z.row(k), self.gamma)).collect::<Vec<_>>());
        self.rows[i] = Some(Rc::clone(&r));
        self.cached += 1;
        r
    }
}

impl SvmModel {
    /// Sequential minimal optimisation with second-order working-set selection.
    pub fn fit(x: &Matrix, labels: &[i8], c: f64, sigma: f64) -> Result<Self> {
        if !(c > 0.0 && sigma > 0.0) {
            return Err(Error::Validation(format!("C = {c} and sigma = {sigma} must be positive")));
        }
        let scaler = Standardizer::fit(x);
        let z = scaler.apply(x);
        let m = z.rows();
        let gamma = 1.0 / (2.0 * sigma * sigma);
        let y: Vec<f64> = labels.iter().map(|&l| if l > 0 { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0; m];
        let mut grad = vec![-1.0; m];
        let mut cache = KernelCache::new(&z, gamma);
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;
        let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && !upper(a[t])) || (y[t] < 0.0 && !lower(a[t]));
        let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && !lower(a[t])) || (y[t] < 0.0 && !upper(a[t]));

        let mut updates = 0;
        let gap = loop {
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..m {
                if in_up(t, &alpha) && -y[t] * grad[t] >= gmax {
                    gmax = -y[t] * grad[t];
                    i = t;
                }
            }
            let mut gmin = f64::INFINITY;
            let mut j = usize::MAX;
            let mut best = f64::INFINITY;
            let ki = if i == usize::MAX { None } else { Some(cache.row(i)) };
            for t in 0..m {
                if !in_low(t, &alpha) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let Some(ki) = ki.as_ref() else { continue };
                let b = gmax - v;
                if b > 0.0 {
                    let a = (2.0 - 2.0 * ki[t]).max(TAU);
                    let obj = -b * b / a;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
            let gap = gmax - gmin;
            if gap < KKT_TOLERANCE || j == usize::MAX {
                break gap.max(0.0);
            }
            if updates >= MAX_UPDATES {
                return Err(Error::Convergence { iterations: updates, detail: format!("KKT gap {gap}") });
            }
            updates += 1;
            let ki = ki.expect("i selected");
            let kj = cache.row(j);
            let qij = y[i] * y[j] * ki[j];
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (2.0 + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (2.0 - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..m {
                grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
            }
        };

        // threshold from free vectors, else midpoint of the feasible interval
        let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for t in 0..m {
            let yg = y[t] * grad[t];
            if upper(alpha[t]) {
                if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else if lower(alpha[t]) {
                if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };

        let sv: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
        Ok(Self {
            support: z.select_rows(&sv),
            coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
            scaler,
            c,
            sigma,
            rho,
            kkt_gap: gap,
            updates,
        })
    }

    /// Signed decision value.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = vec![0.0; row.len()];
        self.scaler.apply_row(row, &mut z);
        let gamma = 1.0 / (2.0 * self.sigma * self.sigma);
        (0..self.support.rows()).map(|k| self.coef[k] * rbf(self.support.row(k), &z, gamma)).sum::<f64>() - self.rho
    }
}
