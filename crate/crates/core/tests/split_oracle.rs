mod common;

use crashcause_core::learners::best_split;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> (Array2<f64>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=50);
    let d = rng.gen_range(1..=4);
    // Few distinct values so ties between features and thresholds are common.
    let levels = rng.gen_range(2..8);
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(0..levels) as f64 * 0.5);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let rows: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.8)).collect();
    let features: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.75)).collect();
    (x, labels, rows, features)
}

#[test]
fn symmetric_duplicates_pick_first_feature() {
    let x = ndarray::array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
    let labels = [0, 0, 1, 1];
    let s = best_split(x.view(), &labels, &[0, 1, 2, 3], &[1, 0]).unwrap();
    assert_eq!((s.feature, s.threshold), (0, 1.5));
    assert_eq!(common::brute_force_split(x.view(), &labels, &[0, 1, 2, 3], &[0, 1]), Some(s));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn equals_brute_force(seed in any::<u64>()) {
        let (x, labels, rows, features) = instance(seed);
        let fast = best_split(x.view(), &labels, &rows, &features);
        let slow = common::brute_force_split(x.view(), &labels, &rows, &features);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn chosen_split_separates_rows(seed in any::<u64>()) {
        let (x, labels, rows, features) = instance(seed);
        if let Some(s) = best_split(x.view(), &labels, &rows, &features) {
            let left = rows.iter().filter(|&&r| x[[r, s.feature]] <= s.threshold).count();
            prop_assert!(left > 0 && left < rows.len());
            prop_assert!(s.gain > 0.0);
        }
    }
}
