//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use crashcause_core::learners::tree::{gini_gain, ClassCounts, SplitCandidate};
use crashcause_core::learners::{MlpGradients, MlpModel};
use crashcause_core::{CrashDataset, FeatureKind, FeatureSchema, SeverityClass};
use crashcause_core::ingest::FeatureSpec;
use ndarray::{Array1, Array2, ArrayView2};

/// Least squares by full-batch gradient descent on centred and scaled data,
/// with a step fixed from the Gram spectrum bound. Returns
/// `(intercept, slopes)`.
pub fn ols_gradient_descent(y: &[f64], x: ArrayView2<f64>, iters: usize) -> (f64, Vec<f64>) {
    let (n, k) = x.dim();
    let mean: Vec<f64> = (0..k).map(|j| x.column(j).sum() / n as f64).collect();
    let scale: Vec<f64> = (0..k)
        .map(|j| (x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let z = Array2::from_shape_fn((n, k), |(i, j)| (x[[i, j]] - mean[j]) / scale[j]);
    let yc: Array1<f64> = y.iter().map(|v| v - ym).collect();
    let gram = z.t().dot(&z) / n as f64;
    // Power iteration for the largest eigenvalue.
    let mut v = Array1::from_elem(k, 1.0);
    let mut lmax = 1.0;
    for _ in 0..200 {
        let w = gram.dot(&v);
        lmax = w.dot(&w).sqrt();
        v = w / lmax;
    }
    let step = 1.0 / lmax;
    let zty = z.t().dot(&yc) / n as f64;
    let mut beta = Array1::<f64>::zeros(k);
    for _ in 0..iters {
        let grad = gram.dot(&beta) - &zty;
        beta = beta - grad * step;
    }
    let slopes: Vec<f64> = (0..k).map(|j| beta[j] / scale[j]).collect();
    let intercept = ym - slopes.iter().zip(&mean).map(|(b, m)| b * m).sum::<f64>();
    (intercept, slopes)
}

/// Every split of every feature, scored with the library's Gini gain, in
/// feature-then-threshold order; the first strictly best candidate wins.
pub fn brute_force_split(x: ArrayView2<f64>, labels: &[usize], rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
    let mut parent: ClassCounts = [0; 3];
    for &r in rows {
        parent[labels[r]] += 1;
    }
    let mut fs = features.to_vec();
    fs.sort_unstable();
    fs.dedup();
    let mut best: Option<SplitCandidate> = None;
    for f in fs {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mid = w[0] + (w[1] - w[0]) / 2.0;
            let t = if mid < w[1] { mid } else { w[0] };
            let mut left: ClassCounts = [0; 3];
            for &r in rows {
                if x[[r, f]] <= t {
                    left[labels[r]] += 1;
                }
            }
            let right = [parent[0] - left[0], parent[1] - left[1], parent[2] - left[2]];
            let g = gini_gain(&parent, &left, &right);
            if g > 1e-12 && best.map_or(true, |b| g > b.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: t,
                    gain: g,
                });
            }
        }
    }
    best
}

/// Mean cross-entropy computed from scratch with explicit loops.
pub fn mlp_loss(model: &MlpModel, z: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let mut a: Vec<f64> = z.row(i).to_vec();
        for (l, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
            let mut next = vec![0.0; w.ncols()];
            for (o, out) in next.iter_mut().enumerate() {
                *out = b[o] + a.iter().enumerate().map(|(p, v)| v * w[[p, o]]).sum::<f64>();
            }
            if l + 1 < model.weights.len() {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = next;
        }
        let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - a[y];
    }
    total / labels.len() as f64
}

/// Central differences of [`mlp_loss`] for every parameter.
pub fn finite_difference(model: &MlpModel, z: ArrayView2<f64>, labels: &[usize], h: f64) -> MlpGradients {
    let mut m = model.clone();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..model.weights.len() {
        let mut gw = Array2::zeros(model.weights[l].dim());
        for idx in ndarray::indices(model.weights[l].dim()) {
            let orig = m.weights[l][idx];
            m.weights[l][idx] = orig + h;
            let up = mlp_loss(&m, z, labels);
            m.weights[l][idx] = orig - h;
            let down = mlp_loss(&m, z, labels);
            m.weights[l][idx] = orig;
            gw[idx] = (up - down) / (2.0 * h);
        }
        let mut gb = Array1::zeros(model.biases[l].len());
        for o in 0..gb.len() {
            let orig = m.biases[l][o];
            m.biases[l][o] = orig + h;
            let up = mlp_loss(&m, z, labels);
            m.biases[l][o] = orig - h;
            let down = mlp_loss(&m, z, labels);
            m.biases[l][o] = orig;
            gb[o] = (up - down) / (2.0 * h);
        }
        weights.push(gw);
        biases.push(gb);
    }
    MlpGradients { weights, biases }
}

/// `(true, predicted)` pair counts by a double loop over class pairs.
pub fn count_pairs(truth: &[usize], pred: &[usize]) -> [[u64; 3]; 3] {
    let mut out = [[0; 3]; 3];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = truth.iter().zip(pred).filter(|(t, p)| **t == a && **p == b).count() as u64;
        }
    }
    out
}

/// Dataset over continuous features named `f0..`.
pub fn dataset(x: Array2<f64>, labels: &[usize]) -> CrashDataset {
    let schema = FeatureSchema::new(
        (0..x.ncols())
            .map(|j| FeatureSpec::new(format!("f{j}"), FeatureKind::Continuous, ""))
            .collect(),
    )
    .unwrap();
    let y = labels.iter().map(|&c| SeverityClass::from_index(c).unwrap()).collect();
    let n = x.nrows() as u64;
    CrashDataset::new(schema, x, y, (0..n).collect()).unwrap()
}
