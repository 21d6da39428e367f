mod common;

use crashcause_core::causality::{fit_ols, LeastSquares};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64, n: usize, k: usize) -> (Vec<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, k), |_| rng.gen_range(-2.0..2.0));
    let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let y = x
        .outer_iter()
        .map(|r| 0.7 + r.iter().zip(&b).map(|(v, c)| v * c).sum::<f64>() + rng.gen_range(-0.5..0.5))
        .collect();
    (y, x)
}

#[test]
fn matches_gradient_descent() {
    for seed in 0..10 {
        let (y, x) = problem(seed, 200, 5);
        let fit = fit_ols(&y, x.view()).unwrap();
        let (a, b) = common::ols_gradient_descent(&y, x.view(), 5000);
        assert!((fit.alpha - a).abs() < 1e-8, "seed {seed}");
        for (u, v) in fit.coefficients.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-8 * v.abs().max(1.0), "seed {seed}: {u} vs {v}");
        }
    }
}

#[test]
fn subset_fit_equals_fresh_fit() {
    let (y, x) = problem(42, 150, 6);
    let ls = LeastSquares::new(ndarray::ArrayView1::from(&y), x.view()).unwrap();
    let cols = [0usize, 2, 5];
    let sub = ls.fit_columns(&cols).unwrap();
    let xs = x.select(ndarray::Axis(1), &cols);
    let direct = fit_ols(&y, xs.view()).unwrap();
    assert!((sub.rss - direct.rss).abs() < 1e-9 * direct.rss);
    for (u, v) in sub.coefficients.iter().zip(&direct.coefficients) {
        assert!((u - v).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residuals_orthogonal_to_regressors(seed in any::<u64>(), n in 12usize..80, k in 1usize..5) {
        let (y, x) = problem(seed, n, k);
        let fit = fit_ols(&y, x.view()).unwrap();
        let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let s: f64 = fit.residuals.iter().sum();
        prop_assert!(s.abs() < 1e-8 * scale * n as f64);
        for j in 0..k {
            let dot: f64 = fit.residuals.iter().zip(x.column(j)).map(|(r, v)| r * v).sum();
            prop_assert!(dot.abs() < 1e-8 * scale * n as f64);
        }
    }

    #[test]
    fn adding_regressors_never_raises_rss(seed in any::<u64>(), n in 15usize..60) {
        let (y, x) = problem(seed, n, 4);
        let ls = LeastSquares::new(ndarray::ArrayView1::from(&y), x.view()).unwrap();
        let small = ls.fit_columns(&[0, 1]).unwrap();
        let big = ls.fit().unwrap();
        prop_assert!(big.rss <= small.rss * (1.0 + 1e-9) + 1e-12);
    }
}
