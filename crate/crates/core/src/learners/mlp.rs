//! Feed-forward network: standardized inputs, rectified hidden layers,
//! softmax output, mean cross-entropy loss, Adam updates.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Classifier, MlpConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `[d_in, hidden..., 3]`.
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` has shape `(layer_sizes[l], layer_sizes[l + 1])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.outer_iter_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
}

impl MlpModel {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero
    /// biases, identity standardizer.
    pub fn init(layer_sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let limit = (6.0 / w[0].max(1) as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-limit..limit)));
            biases.push(Array1::zeros(w[1]));
        }
        let d = layer_sizes[0];
        MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            mean: vec![0.0; d],
            sd: vec![1.0; d],
        }
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        let weights = layer_sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = layer_sizes.windows(2).map(|w| Array1::zeros(w[1])).collect();
        let d = layer_sizes[0];
        MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            mean: vec![0.0; d],
            sd: vec![1.0; d],
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn standardize(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.ncols(),
            });
        }
        let mut z = x.to_owned();
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.sd[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(z)
    }

    /// Activations of every layer for standardized inputs; the last entry is
    /// the softmax output.
    fn activations(&self, z: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(z.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut a = acts[l].dot(w);
            a += b;
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            } else {
                softmax_rows(&mut a);
            }
            acts.push(a);
        }
        acts
    }

    /// Probabilities for raw (unstandardized) inputs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.standardize(x)?;
        Ok(self.forward_standardized(z.view()))
    }

    pub fn forward_standardized(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.activations(z).pop().expect("output layer")
    }

    /// Mean cross-entropy on standardized inputs and its exact gradient.
    pub fn loss_and_gradients(&self, z: ArrayView2<f64>, labels: &[usize]) -> (f64, MlpGradients) {
        let acts = self.activations(z);
        let b = labels.len() as f64;
        let out = acts.last().expect("output layer");
        let mut loss = 0.0;
        for (row, &y) in out.outer_iter().zip(labels) {
            let p = row[y];
            loss -= if p.is_nan() { f64::NAN } else { p.max(f64::MIN_POSITIVE).ln() };
        }
        loss /= b;

        let mut delta = out.clone();
        for (mut row, &y) in delta.outer_iter_mut().zip(labels) {
            row[y] -= 1.0;
        }
        delta.mapv_inplace(|v| v / b);

        let n_layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n_layers];
        let mut gb = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, MlpGradients { weights: gw, biases: gb })
    }
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.n_inputs()
    }

    fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        let v = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let p = self.forward(v).expect("input width checked by caller");
        [p[[0, 0]], p[[0, 1]], p[[0, 2]]]
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(x)
    }
}

/// Free-function form of [`MlpModel::forward`].
pub fn mlp_forward(model: &MlpModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    model.forward(x)
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        Adam {
            m_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &MlpGradients, cfg: &MlpConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = cfg.learning_rate;
        let eps = cfg.epsilon;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.weights.len() {
            ndarray::Zip::from(&mut model.weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut model.biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Trains on raw features; the standardizer is fitted on `x`.
pub fn mlp_train(x: ArrayView2<f64>, labels: &[usize], cfg: &MlpConfig, seed: u64) -> Result<MlpModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    if cfg.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut sizes = vec![x.ncols()];
    sizes.extend_from_slice(&cfg.layers);
    sizes.push(3);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init(&sizes, &mut rng);
    let nf = n as f64;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let m = col.sum() / nf;
        let v = col.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / nf;
        model.mean[j] = m;
        model.sd[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
    }
    let z = model.standardize(x)?;

    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let xb = z.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(xb.view(), &yb);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    learning_rate: cfg.learning_rate,
                });
            }
            adam.step(&mut model, &grads, cfg);
        }
    }
    Ok(model)
}
