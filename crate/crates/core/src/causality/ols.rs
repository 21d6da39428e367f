//! Ordinary least squares through the normal equations.
//!
//! Regressors are centred and scaled to unit RMS before forming the Gram
//! matrix; the intercept is then recovered from the column means. A
//! [`LeastSquares`] problem is prepared once and can be fitted on any subset
//! of its columns, which is how nested (restricted/full) models share work.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Ridge multiplier applied to `trace(G)/k` when the plain factorization fails.
pub const RIDGE_FACTOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct OlsFit {
    /// Intercept.
    pub alpha: f64,
    /// Slope coefficients in regressor order.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// `rss / n_eff`.
    pub resid_var: f64,
    pub n_eff: usize,
    /// Coefficient count including the intercept.
    pub k: usize,
    /// Whether the ridge fallback was needed.
    pub ridged: bool,
}

impl OlsFit {
    /// Least-squares AIC: `n ln(rss/n) + 2k`.
    pub fn aic(&self) -> f64 {
        let n = self.n_eff as f64;
        n * (self.rss / n).ln() + 2.0 * self.k as f64
    }
}

/// Pivots below this fraction of their original diagonal entry count as
/// numerically singular.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Lower Cholesky factor of a symmetric matrix. Returns `None` when a pivot
/// is not safely positive.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let k = a.nrows();
    let mut l = Array2::<f64>::zeros((k, k));
    for j in 0..k {
        let mut diag = a[[j, j]];
        for p in 0..j {
            diag -= l[[j, p]] * l[[j, p]];
        }
        if !(diag > PIVOT_TOLERANCE * a[[j, j]]) || !diag.is_finite() {
            return None;
        }
        let djj = diag.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..k {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let k = l.nrows();
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[[i, p]] * z[p];
        }
        z[i] = s / l[[i, i]];
    }
    for i in (0..k).rev() {
        let mut s = z[i];
        for p in (i + 1)..k {
            s -= l[[p, i]] * z[p];
        }
        z[i] = s / l[[i, i]];
    }
    z
}

/// Solves the SPD system `g x = b`, retrying once with a ridge term.
fn solve_spd(g: &Array2<f64>, b: &[f64]) -> Result<(Vec<f64>, bool)> {
    if let Some(l) = cholesky(g) {
        return Ok((cholesky_solve(&l, b), false));
    }
    let k = g.nrows();
    let trace: f64 = g.diag().sum();
    let ridge = RIDGE_FACTOR * trace / k as f64;
    let mut gr = g.clone();
    let bump = if ridge > 0.0 { ridge } else { RIDGE_FACTOR };
    for i in 0..k {
        gr[[i, i]] += bump;
    }
    match cholesky(&gr) {
        Some(l) => Ok((cholesky_solve(&l, b), true)),
        None => Err(Error::Singular { columns: k }),
    }
}

/// A prepared least-squares problem `target ~ 1 + regressors`.
pub struct LeastSquares {
    z: Array2<f64>,
    yc: Array1<f64>,
    y_mean: f64,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Columns that are constant over the rows; collinear with the intercept.
    constant: Vec<bool>,
    gram: Array2<f64>,
    zty: Array1<f64>,
}

impl LeastSquares {
    pub fn new(target: ArrayView1<f64>, regressors: ArrayView2<f64>) -> Result<Self> {
        let n = target.len();
        let m = regressors.ncols();
        if regressors.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: regressors.nrows(),
            });
        }
        if n < m + 1 || n == 0 {
            return Err(Error::InsufficientData(format!(
                "{n} rows for {} coefficients",
                m + 1
            )));
        }
        let means: Vec<f64> = regressors
            .mean_axis(Axis(0))
            .map(|a| a.to_vec())
            .unwrap_or_default();
        let mut z = regressors.to_owned();
        let mut scales = vec![1.0; m];
        let mut constant = vec![false; m];
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v - means[j]);
            let rms = (col.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            if rms > 0.0 {
                scales[j] = rms;
                col.mapv_inplace(|v| v / rms);
            } else {
                constant[j] = true;
            }
        }
        let y_mean = target.sum() / n as f64;
        let yc = target.mapv(|v| v - y_mean);
        let gram = z.t().dot(&z);
        let zty = z.t().dot(&yc);
        Ok(LeastSquares {
            z,
            yc,
            y_mean,
            means,
            scales,
            constant,
            gram,
            zty,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.yc.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.z.ncols()
    }

    /// Fit using every regressor.
    pub fn fit(&self) -> Result<OlsFit> {
        let all: Vec<usize> = (0..self.n_regressors()).collect();
        self.fit_columns(&all)
    }

    /// Fit using only the listed regressor columns (same rows).
    pub fn fit_columns(&self, columns: &[usize]) -> Result<OlsFit> {
        let n = self.n_rows();
        let k = columns.len();
        if n < k + 1 {
            return Err(Error::InsufficientData(format!("{n} rows for {} coefficients", k + 1)));
        }
        // Constant columns get a zero slope; the intercept absorbs them.
        let active: Vec<usize> = columns.iter().copied().filter(|&c| !self.constant[c]).collect();
        let (active_beta, ridged) = if active.is_empty() {
            (Vec::new(), false)
        } else {
            let ka = active.len();
            let g = Array2::from_shape_fn((ka, ka), |(a, b)| self.gram[[active[a], active[b]]]);
            let b: Vec<f64> = active.iter().map(|&c| self.zty[c]).collect();
            solve_spd(&g, &b)?
        };
        let mut beta = vec![0.0; k];
        let mut it = active_beta.into_iter();
        for (slot, &c) in beta.iter_mut().zip(columns) {
            if !self.constant[c] {
                *slot = it.next().expect("one coefficient per active column");
            }
        }
        let mut residuals = self.yc.to_vec();
        for (&c, &bj) in columns.iter().zip(&beta) {
            if bj != 0.0 {
                for (r, zv) in residuals.iter_mut().zip(self.z.column(c)) {
                    *r -= bj * zv;
                }
            }
        }
        let rss: f64 = residuals.iter().map(|e| e * e).sum();
        let coefficients: Vec<f64> = columns
            .iter()
            .zip(&beta)
            .map(|(&c, &bj)| bj / self.scales[c])
            .collect();
        let alpha = self.y_mean
            - columns
                .iter()
                .zip(&coefficients)
                .map(|(&c, &a)| a * self.means[c])
                .sum::<f64>();
        Ok(OlsFit {
            alpha,
            coefficients,
            residuals,
            rss,
            resid_var: rss / n as f64,
            n_eff: n,
            k: k + 1,
            ridged,
        })
    }
}

/// Regresses `target` on an intercept plus the columns of `regressors`.
pub fn fit_ols(target: &[f64], regressors: ArrayView2<f64>) -> Result<OlsFit> {
    LeastSquares::new(ArrayView1::from(target), regressors)?.fit()
}
