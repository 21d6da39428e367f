//! Multiclass Newton boosting on the softmax cross-entropy.
//!
//! Each round fits one regression tree per class to the per-row gradient
//! `g = p_c - 1[y = c]` and hessian `h = p_c (1 - p_c)`. Leaves carry
//! `w = -G / (H + lambda)`; a split is kept only if
//! `0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma > 0`.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{presort, Builder, GrowParams, Objective, Tree};
use super::{BoostConfig, Classifier};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct GradStats {
    g: f64,
    h: f64,
}

pub(crate) struct NewtonObjective<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

/// Structure-score gain of a split, net of `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score_term(gl, hl, lambda) + score_term(gr, hr, lambda) - score_term(gl + gr, hl + hr, lambda)) - gamma
}

impl Objective for NewtonObjective<'_> {
    type Stats = GradStats;
    type Leaf = f64;

    fn add(&self, stats: &mut GradStats, sample: usize) {
        stats.g += self.g[sample];
        stats.h += self.h[sample];
    }

    fn sub(&self, parent: &GradStats, left: &GradStats) -> GradStats {
        GradStats {
            g: parent.g - left.g,
            h: parent.h - left.h,
        }
    }

    fn gain(&self, _parent: &GradStats, left: &GradStats, right: &GradStats) -> Option<f64> {
        if left.h < self.min_child_hessian || right.h < self.min_child_hessian {
            return None;
        }
        Some(split_gain(left.g, left.h, right.g, right.h, self.lambda, self.gamma))
    }

    fn is_pure(&self, _stats: &GradStats) -> bool {
        false
    }

    fn leaf(&self, stats: &GradStats) -> f64 {
        leaf_weight(stats.g, stats.h, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    /// One tree per class for each round.
    pub rounds: Vec<[Tree<f64>; 3]>,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub base_score: f64,
    pub n_features: usize,
    /// Mean training log-loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax3(s: [f64; 3]) -> [f64; 3] {
    let m = s[0].max(s[1]).max(s[2]);
    let e = [(s[0] - m).exp(), (s[1] - m).exp(), (s[2] - m).exp()];
    let z = e[0] + e[1] + e[2];
    [e[0] / z, e[1] / z, e[2] / z]
}

impl BoostModel {
    pub fn scores(&self, x: &[f64]) -> [f64; 3] {
        let mut s = [self.base_score; 3];
        for round in &self.rounds {
            for c in 0..3 {
                s[c] += self.eta * round[c].leaf_for(x);
            }
        }
        s
    }
}

impl Classifier for BoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        softmax3(self.scores(x))
    }
}

fn mean_log_loss(scores: &[[f64; 3]], labels: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| {
            let m = s[0].max(s[1]).max(s[2]);
            let lse = m + ((s[0] - m).exp() + (s[1] - m).exp() + (s[2] - m).exp()).ln();
            lse - s[y]
        })
        .sum();
    total / labels.len() as f64
}

pub fn train_gradient_boost(x: ArrayView2<f64>, labels: &[usize], config: &BoostConfig) -> Result<BoostModel> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("boosting needs >= 2 rows, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    if !(config.lambda >= 0.0) || !(config.eta >= 0.0) || !(config.gamma >= 0.0) {
        return Err(Error::InvalidArgument("eta, lambda and gamma must be non-negative".into()));
    }
    let orders = presort(&x);
    let sample_rows: Vec<usize> = (0..n).collect();
    let mut scores = vec![[config.base_score; 3]; n];
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut loss_trace = vec![mean_log_loss(&scores, labels)];

    for _ in 0..config.rounds {
        let probs: Vec<[f64; 3]> = scores.iter().map(|&s| softmax3(s)).collect();
        let trees: Vec<Tree<f64>> = (0..3)
            .into_par_iter()
            .map(|c| {
                let g: Vec<f64> = probs
                    .iter()
                    .zip(labels)
                    .map(|(p, &y)| p[c] - if y == c { 1.0 } else { 0.0 })
                    .collect();
                let h: Vec<f64> = probs.iter().map(|p| p[c] * (1.0 - p[c])).collect();
                let obj = NewtonObjective {
                    g: &g,
                    h: &h,
                    lambda: config.lambda,
                    gamma: config.gamma,
                    min_child_hessian: config.min_child_hessian,
                };
                let params = GrowParams {
                    max_depth: Some(config.max_depth),
                    min_samples_split: 2,
                    features_per_split: None,
                };
                let members: Vec<u32> = (0..n as u32).collect();
                Builder::new(&obj, x, &sample_rows, params, None).grow(orders.clone(), members)
            })
            .collect();
        let trees: [Tree<f64>; 3] = trees.try_into().expect("three class trees");
        for (i, row) in x.outer_iter().enumerate() {
            let r = row.to_vec();
            for c in 0..3 {
                scores[i][c] += config.eta * trees[c].leaf_for(&r);
            }
        }
        rounds.push(trees);
        loss_trace.push(mean_log_loss(&scores, labels));
    }

    Ok(BoostModel {
        rounds,
        eta: config.eta,
        lambda: config.lambda,
        gamma: config.gamma,
        base_score: config.base_score,
        n_features: x.ncols(),
        loss_trace,
    })
}
