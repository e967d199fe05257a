use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted one half.
///
/// Labels are `+1` / `-1`; larger scores indicate the positive class.
pub fn auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&y| y > 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // mid-ranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] > 0).count();
        rank_sum_pos += mid * tied_pos as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[i8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi > 0 && yj < 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn known_values() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[-1, -1, 1, 1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.0, 0.1, 0.9, 1.0], &[-1, -1, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &[-1, 1, 1, -1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::Undefined(_))));
        assert!(matches!(auc(&[0.1], &[1, -1]), Err(Error::Shape(_))));
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<i8>)> {
        (2usize..120).prop_flat_map(|n| {
            (
                prop::collection::vec((0i32..12).prop_map(|v| v as f64 / 4.0), n),
                prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), n),
            )
        })
        .prop_filter("both classes", |(_, y)| y.contains(&1) && y.contains(&-1))
    }

    proptest! {
        #[test]
        fn matches_pairwise_count((s, y) in scored()) {
            prop_assert!((auc(&s, &y).unwrap() - brute(&s, &y)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_maps((s, y) in scored(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
            let t: Vec<f64> = s.iter().map(|v| (a * v + b).exp() + v.powi(3)).collect();
            prop_assert!((auc(&s, &y).unwrap() - auc(&t, &y).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn complement_sums_to_one(y in prop::collection::vec(prop::bool::ANY, 2..80), seed in 0u64..1000) {
            prop_assume!(y.contains(&true) && y.contains(&false));
            let labels: Vec<i8> = y.iter().map(|&b| if b { 1 } else { -1 }).collect();
            // distinct scores
            let s: Vec<f64> = (0..labels.len()).map(|i| ((i as u64 * 7919 + seed) % 1009) as f64 + i as f64 / 1e4).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auc(&s, &labels).unwrap() + auc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
