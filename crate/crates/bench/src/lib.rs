//! Fixtures shared by the benchmarks.

use crashcause_core::learners::MlpModel;
use crashcause_core::synthgen::{generate, SynthSpec};
use crashcause_core::CrashDataset;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic crash table with the default planted structure.
pub fn crash_data(n: usize, d: usize, seed: u64) -> CrashDataset {
    let spec = SynthSpec {
        n,
        d,
        planted: (0..d.min(5)).collect(),
        seed,
        ..Default::default()
    };
    generate(&spec).expect("valid bench spec")
}

/// Uniform regressors and a noisy linear target.
pub fn regression(n: usize, k: usize, seed: u64) -> (Vec<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
    let y = x
        .outer_iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum::<f64>() + rng.gen_range(-0.1..0.1))
        .collect();
    (y, x)
}

pub fn mlp(sizes: &[usize], seed: u64) -> MlpModel {
    MlpModel::init(sizes, &mut ChaCha8Rng::seed_from_u64(seed))
}
