use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training class counts reaching this node.
    pub counts: Vec<f64>,
    pub split: Option<Split>,
}

impl Node {
    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// n * Gini
    fn risk(&self) -> f64 {
        weighted_gini(&self.counts)
    }
}

fn weighted_gini(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        0.0
    } else {
        n - counts.iter().map(|c| c * c).sum::<f64>() / n
    }
}

/// CART classification tree: Gini splits, full growth, cost-complexity pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub n_features: usize,
    pub cp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub cp: f64,
    /// Candidate features per split; `None` uses all of them.
    pub mtry: Option<usize>,
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, params: TreeParams, mut rng: Option<&mut Rng>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!("{} rows for {} targets", x.rows(), y.len())));
        }
        if x.rows() == 0 {
            return Err(Error::Validation("empty training set".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::Validation(format!("class {bad} out of range")));
        }
        if !(0.0..=1.0).contains(&params.cp) {
            return Err(Error::Validation(format!("cp {} outside [0, 1]", params.cp)));
        }
        let mut tree = Self { nodes: Vec::new(), n_classes, n_features: x.cols(), cp: params.cp };
        let mut stack = vec![(0usize, (0..x.rows()).collect::<Vec<_>>())];
        tree.nodes.push(Node { counts: counts(y, &stack[0].1, n_classes), split: None });
        let mut features: Vec<usize> = (0..x.cols()).collect();

        while let Some((id, idx)) = stack.pop() {
            if tree.nodes[id].counts.iter().filter(|&&c| c > 0.0).count() < 2 {
                continue;
            }
            let order: &[usize] = match rng.as_deref_mut() {
                Some(r) => {
                    features.shuffle(r);
                    &features
                }
                None => &features,
            };
            let mtry = params.mtry.unwrap_or(x.cols()).clamp(1, x.cols().max(1));
            let mut best: Option<(f64, usize, f64)> = None;
            for (tried, &f) in order.iter().enumerate() {
                // fall back to further features only while nothing is splittable
                if tried >= mtry && best.is_some() {
                    break;
                }
                if let Some((imp, thr)) = best_split(x, y, &idx, f, n_classes) {
                    if best.is_none_or(|(b, _, _)| imp < b) {
                        best = Some((imp, f, thr));
                    }
                }
            }
            let Some((_, feature, threshold)) = best else { continue };
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[(i, feature)] <= threshold);
            let left = tree.nodes.len();
            tree.nodes.push(Node { counts: counts(y, &l, n_classes), split: None });
            tree.nodes.push(Node { counts: counts(y, &r, n_classes), split: None });
            tree.nodes[id].split = Some(Split { feature, threshold, left, right: left + 1 });
            stack.push((left + 1, r));
            stack.push((left, l));
        }
        if params.cp > 0.0 {
            tree.prune(params.cp);
        }
        Ok(tree)
    }

    /// Weakest-link pruning: collapse subtrees whose impurity reduction per
    /// extra leaf is below `cp` times the root impurity.
    fn prune(&mut self, cp: f64) {
        let alpha = cp * self.nodes[0].risk();
        loop {
            let mut stats = vec![(0.0, 0usize); self.nodes.len()];
            let mut weakest: Option<(f64, usize)> = None;
            for id in self.post_order() {
                match self.nodes[id].split {
                    None => stats[id] = (self.nodes[id].risk(), 1),
                    Some(s) => {
                        let (rl, ll) = stats[s.left];
                        let (rr, lr) = stats[s.right];
                        stats[id] = (rl + rr, ll + lr);
                        let g = (self.nodes[id].risk() - (rl + rr)) / (ll + lr - 1) as f64;
                        if weakest.is_none_or(|(w, _)| g < w) {
                            weakest = Some((g, id));
                        }
                    }
                }
            }
            match weakest {
                Some((g, id)) if g < alpha => self.nodes[id].split = None,
                _ => break,
            }
        }
        self.compact();
    }

    fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, false)];
        while let Some((id, expanded)) = stack.pop() {
            match (self.nodes[id].split, expanded) {
                (Some(s), false) => {
                    stack.push((id, true));
                    stack.push((s.right, false));
                    stack.push((s.left, false));
                }
                _ => out.push(id),
            }
        }
        out
    }

    fn compact(&mut self) {
        let mut nodes = Vec::new();
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((old, parent)) = stack.pop() {
            let new = nodes.len();
            let mut node = self.nodes[old].clone();
            let children = node.split.map(|s| (s.left, s.right));
            if let Some(s) = node.split.as_mut() {
                s.left = usize::MAX;
                s.right = usize::MAX;
            }
            nodes.push(node);
            if let Some((p, is_left)) = parent {
                let s: &mut Split = nodes[p].split.as_mut().expect("parent has a split");
                if is_left {
                    s.left = new;
                } else {
                    s.right = new;
                }
            }
            if let Some((l, r)) = children {
                stack.push((r, Some((new, false))));
                stack.push((l, Some((new, true))));
            }
        }
        self.nodes = nodes;
    }

    pub fn leaf(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = &self.nodes[if row[s.feature] <= s.threshold { s.left } else { s.right }];
        }
        node
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let leaf = self.leaf(row);
        let n = leaf.total();
        leaf.counts.iter().map(|c| c / n).collect()
    }

    /// Majority class of the leaf; ties go to the lower class index.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        crate::nn::argmax(&self.leaf(row).counts)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }
}

fn counts(y: &[usize], idx: &[usize], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for &i in idx {
        c[y[i]] += 1.0;
    }
    c
}

/// Lowest weighted child impurity over thresholds of one feature.
fn best_split(x: &Matrix, y: &[usize], idx: &[usize], f: usize, k: usize) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (x[(i, f)], y[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for &(_, c) in &pairs {
        right[c] += 1.0;
    }
    let mut best: Option<(f64, f64)> = None;
    for w in 0..pairs.len() - 1 {
        let c = pairs[w].1;
        left[c] += 1.0;
        right[c] -= 1.0;
        let (a, b) = (pairs[w].0, pairs[w + 1].0);
        if a == b {
            continue;
        }
        let imp = weighted_gini(&left) + weighted_gini(&right);
        if best.is_none_or(|(bi, _)| imp < bi - 1e-12) {
            let mid = a + (b - a) / 2.0;
            let thr = if mid < b { mid } else { a };
            best = Some((imp, thr));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn params(cp: f64) -> TreeParams {
        TreeParams { cp, mtry: None }
    }

    #[test]
    fn xor_corners_need_a_zero_gain_first_split() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = [1, 1, 0, 0];
        let t = DecisionTree::fit(&x, &y, 2, params(0.0), None).unwrap();
        for i in 0..4 {
            assert_eq!(t.predict_row(x.row(i)), y[i]);
        }
        assert_eq!(t.leaves(), 4);
    }

    #[test]
    fn large_cp_prunes_weak_splits() {
        // one clean split plus label noise deeper down
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let v = i as f64;
            rows.push(vec![v, (i * 37 % 11) as f64]);
            y.push(usize::from(i >= 100) ^ usize::from(i % 17 == 0));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let full = DecisionTree::fit(&x, &y, 2, params(0.0), None).unwrap();
        let mid = DecisionTree::fit(&x, &y, 2, params(0.03), None).unwrap();
        let stump = DecisionTree::fit(&x, &y, 2, params(0.81), None).unwrap();
        assert!(full.leaves() > mid.leaves());
        assert!(mid.leaves() >= 2);
        assert!(stump.leaves() <= 2);
        assert_eq!(stump.nodes.len(), 2 * stump.leaves() - 1);
    }

    #[test]
    fn prune_threshold_matches_hand_computation() {
        // root gini impurity 50, split to pure halves: gain 50 = 1.0 * root
        let x = Matrix::from_rows(&(0..100).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        assert_eq!(DecisionTree::fit(&x, &y, 2, params(0.81), None).unwrap().leaves(), 2);
        assert_eq!(DecisionTree::fit(&x, &y, 2, params(1.0), None).unwrap().leaves(), 2);
        // best single split gains 18 of the root 50, below 0.81
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 50 && i < 90 || i < 10)).collect();
        let t = DecisionTree::fit(&x, &y, 2, params(0.81), None).unwrap();
        assert_eq!(t.leaves(), 1);
    }

    #[test]
    fn multiclass_counts() {
        let x = Matrix::from_rows(&(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let t = DecisionTree::fit(&x, &y, 3, params(0.03), None).unwrap();
        assert_eq!(t.leaves(), 3);
        assert_eq!(t.proba_row(&[15.0]), vec![0.0, 1.0, 0.0]);
        assert!(DecisionTree::fit(&x, &y, 2, params(0.0), None).is_err());
    }

    #[test]
    fn mtry_falls_back_to_splittable_features() {
        // first two columns constant; only the third separates
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, 2.0, i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let mut r = rng::substream(1, "t", 0);
        let t = DecisionTree::fit(&Matrix::from_rows(&rows).unwrap(), &y, 2, TreeParams { cp: 0.0, mtry: Some(1) }, Some(&mut r)).unwrap();
        assert_eq!(t.leaves(), 2);
    }

    proptest! {
        #[test]
        fn unpruned_tree_is_pure_on_consistent_data(seed in 0u64..500, m in 2usize..80, n in 1usize..4) {
            let mut r = rng::substream(seed, "tree-prop", 0);
            // coarse grid values force duplicate coordinates
            let mut rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.random_range(0..4) as f64).collect()).collect();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rows.dedup();
            let y: Vec<usize> = rows.iter().map(|_| r.random_range(0..2)).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let t = DecisionTree::fit(&x, &y, 2, params(0.0), None).unwrap();
            for (i, &c) in y.iter().enumerate() {
                prop_assert_eq!(t.predict_row(x.row(i)), c);
            }
        }
    }
}
