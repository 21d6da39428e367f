use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{grow_classifier, presort, DecisionTreeModel};
use super::{Classifier, ForestConfig, TreeConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_estimators: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub n_features: usize,
}

/// Generator for tree `index`: the master seed picks the key, the tree index
/// picks the ChaCha stream, so trees can be trained in any order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn default_features_per_split(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

pub fn train_random_forest(x: ArrayView2<f64>, labels: &[usize], config: &ForestConfig, seed: u64) -> Result<RandomForestModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::InsufficientData(format!("random forest needs >= 2 rows, got {n}")));
    }
    if config.estimators == 0 {
        return Err(Error::InvalidArgument("estimators must be >= 1".into()));
    }
    let m = config
        .features_per_split
        .unwrap_or_else(|| default_features_per_split(d))
        .clamp(1, d.max(1));
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
    };
    let orders = presort(&x);
    let trees = (0..config.estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(seed, i);
            let mut counts = vec![0u32; n];
            if config.bootstrap {
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
            } else {
                counts.fill(1);
            }
            grow_classifier(x, labels, &orders, &counts, &tree_cfg, Some(m), Some(&mut rng))
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_estimators: config.estimators,
        features_per_split: m,
        bootstrap: config.bootstrap,
        seed,
        n_features: d,
    })
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the per-tree leaf distributions.
    fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for t in &self.trees {
            let p = t.proba_row(x);
            for c in 0..3 {
                acc[c] += p[c];
            }
        }
        let k = self.trees.len() as f64;
        [acc[0] / k, acc[1] / k, acc[2] / k]
    }
}
