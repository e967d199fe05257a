use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use tabpat::rng::substream;
use tabpat::{canonicalize, gen_pattern, CanonSpec, CanonStrategy, Matrix, PatternClass, PatternSpec, TabularDataset};

fn random_dataset(m: usize, n: usize, seed: u64) -> TabularDataset {
    let mut r = substream(seed, "invariants", 0);
    let x: Vec<f64> = (0..m * n).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut labels: Vec<i8> = (0..m).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
    labels[0] = 1;
    labels[m - 1] = -1;
    TabularDataset::new("inv", Matrix::from_vec(m, n, x).unwrap(), labels).unwrap()
}

/// Standardised features (population sd) with the label appended, straight from the definition.
fn design(ds: &TabularDataset) -> DMatrix<f64> {
    let (m, n) = (ds.m(), ds.n());
    DMatrix::from_fn(m, n + 1, |i, j| {
        if j == n {
            return f64::from(ds.labels[i]);
        }
        let col = ds.features.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        (col[i] - mean) / sd
    })
}

#[test]
fn pca_compact_rows_are_scaled_right_singular_vectors() {
    for (m, n, seed) in [(30, 3, 1), (12, 6, 2), (200, 5, 3), (9, 1, 4)] {
        let ds = random_dataset(m, n, seed);
        let spec = CanonSpec::new(16, 7, CanonStrategy::PcaCompact);
        let img = canonicalize(&ds, &spec).unwrap().pixels;

        let svd = design(&ds).svd(false, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for (k, &s) in order.iter().enumerate() {
            let sigma = svd.singular_values[s];
            let mut v: Vec<f64> = vt.row(s).iter().copied().collect();
            let big = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            if v[big] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let row = img.row(k);
            for j in 0..n {
                assert!((row[j] - sigma * v[j]).abs() < 1e-9, "({m},{n}) row {k} col {j}: {} vs {}", row[j], sigma * v[j]);
            }
            // unused feature columns are padding
            assert!(row[n..6].iter().all(|&x| x == 0.0));
            assert!((row[6] - sigma * v[n]).abs() < 1e-9);
        }
        for k in order.len()..16 {
            assert!(img.row(k).iter().all(|&x| x == 0.0), "row {k} should be padding");
        }
    }
}

#[test]
fn sort_resample_padding_is_exactly_zero() {
    let ds = random_dataset(20, 3, 5);
    let img = canonicalize(&ds, &CanonSpec::new(32, 7, CanonStrategy::SortResample)).unwrap().pixels;
    for i in 0..32 {
        let row = img.row(i);
        assert!(row[3..6].iter().all(|&x| x == 0.0));
        if i >= 20 {
            assert!(row.iter().all(|&x| x == 0.0));
        } else {
            assert!(row[6] == 1.0 || row[6] == -1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, .. ProptestConfig::default() })]

    #[test]
    fn sort_resample_ignores_row_order(m in 4usize..400, n in 1usize..12, rows in 1usize..200, seed in any::<u64>()) {
        let ds = random_dataset(m, n, seed);
        let mut order: Vec<usize> = (0..m).collect();
        order.reverse();
        order.rotate_left(seed as usize % m);
        let spec = CanonSpec::new(rows, 7, CanonStrategy::SortResample);
        let a = canonicalize(&ds, &spec).unwrap().pixels;
        let b = canonicalize(&ds.subset(&order), &spec).unwrap().pixels;
        prop_assert_eq!((a.rows(), a.cols()), (rows, 7));
        prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn generated_datasets_are_balanced_and_finite(p in 0usize..5, half in 2usize..150, noise in 0usize..5, seed in any::<u64>()) {
        let pattern = PatternClass::from_index(p).unwrap();
        let spec = PatternSpec { noise_dims: noise, shift_sd: 1.0, log_scale_sd: 0.5, ..PatternSpec::reference(pattern, 2 * half, seed) };
        let ds = gen_pattern(&spec).unwrap();
        prop_assert_eq!(ds.class_counts(), (half, half));
        prop_assert_eq!(ds.n(), 2 + noise);
        prop_assert!(ds.features.is_finite());
        prop_assert_eq!(gen_pattern(&spec).unwrap(), ds);
    }
}
