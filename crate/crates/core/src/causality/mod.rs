//! Conditional Granger causality of crash predictors on severity.
//!
//! The observation sequence is the dataset row order. For a predictee `X`,
//! candidate cause `Y` and conditioning set `Z`, two nested lagged
//! regressions are fitted on the same rows:
//!
//! ```text
//! restricted: X_t = a  + [X_{t-1..t-p}, Z_{t-1..t-r}] A  + e_t
//! full:       X_t = a' + [X_{t-1..t-p}, Y_{t-1..t-q}, Z_{t-1..t-r}] A' + e'_t
//! ```
//!
//! and the score is `G = ln(var(e) / var(e'))`, floored and clamped at zero.

mod ols;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ols::{fit_ols, LeastSquares, OlsFit, RIDGE_FACTOR};

use crate::error::{Error, Result};
use crate::ingest::{Column, CrashDataset};

/// Floor applied to the full-model residual variance before the log ratio.
pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_LAG: usize = 4;
pub const DEFAULT_MAX_LAG: usize = 8;
pub const DEFAULT_TOP_K: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    /// Self-lags of the predictee.
    pub p: usize,
    /// Lags of the candidate cause.
    pub q: usize,
    /// Lags of each conditioning variable.
    pub r: usize,
}

impl Default for LagSpec {
    fn default() -> Self {
        LagSpec::uniform(DEFAULT_LAG)
    }
}

impl LagSpec {
    pub fn new(p: usize, q: usize, r: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidArgument(format!("lags p={p}, q={q} must be >= 1")));
        }
        Ok(LagSpec { p, q, r })
    }

    pub fn uniform(lag: usize) -> Self {
        LagSpec { p: lag, q: lag, r: lag }
    }

    pub fn max_lag(&self) -> usize {
        self.p.max(self.q).max(self.r)
    }
}

/// Rows `window..n` of the lag blocks, each block contributing lags `1..=l`.
fn lagged_matrix(ds: &CrashDataset, target: Column, blocks: &[(Column, usize)], window: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = ds.n_rows();
    if n <= window {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot support lag window {window}"
        )));
    }
    let n_eff = n - window;
    let width: usize = blocks.iter().map(|(_, l)| l).sum();
    if n_eff < width + 2 {
        return Err(Error::InsufficientData(format!(
            "{n_eff} usable rows for {} coefficients",
            width + 1
        )));
    }
    let y = ds.series(target);
    let target_vec = y[window..].to_vec();
    let mut m = Array2::<f64>::zeros((n_eff, width));
    let mut col = 0;
    for &(c, lags) in blocks {
        let s = if c == target { y.clone() } else { ds.series(c) };
        for l in 1..=lags {
            for row in 0..n_eff {
                m[[row, col]] = s[window + row - l];
            }
            col += 1;
        }
    }
    Ok((target_vec, m))
}

fn check_columns(ds: &CrashDataset, cols: &[Column]) -> Result<()> {
    for (i, c) in cols.iter().enumerate() {
        if let Column::Feature(j) = c {
            if *j >= ds.n_features() {
                return Err(Error::InvalidArgument(format!("feature column {j} out of range")));
            }
        }
        if cols[..i].contains(c) {
            return Err(Error::InvalidArgument(format!("column {c:?} used twice")));
        }
    }
    Ok(())
}

/// Target vector and regressor matrix (without intercept) for the lagged
/// model. Columns are the predictee's `p` lags, then the cause's `q` lags when
/// a cause is given, then `r` lags of each conditioner in order.
pub fn build_lagged_design(
    ds: &CrashDataset,
    predictee: Column,
    cause: Option<Column>,
    conditioners: &[Column],
    lags: LagSpec,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let mut cols = vec![predictee];
    cols.extend(cause);
    cols.extend_from_slice(conditioners);
    check_columns(ds, &cols)?;
    if lags.p == 0 || (cause.is_some() && lags.q == 0) {
        return Err(Error::InvalidArgument("predictee and cause lags must be >= 1".into()));
    }
    let mut blocks = vec![(predictee, lags.p)];
    let window = if let Some(c) = cause {
        blocks.push((c, lags.q));
        lags.max_lag()
    } else {
        lags.p.max(if conditioners.is_empty() { 0 } else { lags.r })
    };
    blocks.extend(conditioners.iter().map(|&z| (z, lags.r)));
    let blocks: Vec<_> = blocks.into_iter().filter(|(_, l)| *l > 0).collect();
    lagged_matrix(ds, predictee, &blocks, window)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LagSelection {
    pub best_lag: usize,
    /// `(lag, AIC)` for every lag tried.
    pub aic_trace: Vec<(usize, f64)>,
}

/// Picks the uniform lag minimising least-squares AIC over `1..=max_lag`.
/// Every candidate is fitted on the rows available at `max_lag`.
pub fn select_lag_aic(
    ds: &CrashDataset,
    predictee: Column,
    conditioners: &[Column],
    max_lag: usize,
) -> Result<LagSelection> {
    if max_lag == 0 {
        return Err(Error::InvalidArgument("max_lag must be >= 1".into()));
    }
    let mut cols = vec![predictee];
    cols.extend_from_slice(conditioners);
    check_columns(ds, &cols)?;
    let mut trace = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let blocks: Vec<(Column, usize)> = cols.iter().map(|&c| (c, lag)).collect();
        let (y, m) = lagged_matrix(ds, predictee, &blocks, max_lag)?;
        let fit = fit_ols(&y, m.view())?;
        trace.push((lag, fit.aic()));
    }
    let mut best = trace[0];
    for &(lag, aic) in &trace[1..] {
        if aic < best.1 {
            best = (lag, aic);
        }
    }
    Ok(LagSelection {
        best_lag: best.0,
        aic_trace: trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcScore {
    pub feature: String,
    /// Column index of the cause in the dataset schema.
    pub column: usize,
    pub g: f64,
    pub restricted_var: f64,
    pub full_var: f64,
}

impl GcScore {
    fn from_vars(feature: String, column: usize, restricted_var: f64, full_var: f64) -> Self {
        let mut s = GcScore {
            feature,
            column,
            g: 0.0,
            restricted_var,
            full_var,
        };
        s.g = s.unclamped().max(0.0);
        s
    }

    /// Log variance ratio before clamping at zero.
    pub fn unclamped(&self) -> f64 {
        if self.restricted_var <= 0.0 {
            return 0.0;
        }
        (self.restricted_var / self.full_var.max(VARIANCE_FLOOR)).ln()
    }
}

fn column_name(ds: &CrashDataset, c: Column) -> (String, usize) {
    match c {
        Column::Feature(j) => (ds.schema().name(j).to_string(), j),
        Column::Severity => ("severity".to_string(), usize::MAX),
    }
}

/// Conditional Granger score of `cause` on `predictee` given `conditioners`.
pub fn gc_score(
    ds: &CrashDataset,
    predictee: Column,
    cause: Column,
    conditioners: &[Column],
    lags: LagSpec,
) -> Result<GcScore> {
    if lags.q == 0 {
        return Err(Error::Config("restricted and full designs coincide (q = 0)".into()));
    }
    if cause == predictee || conditioners.contains(&cause) {
        return Err(Error::Config("cause must differ from predictee and conditioners".into()));
    }
    let (y, m) = build_lagged_design(ds, predictee, Some(cause), conditioners, lags)?;
    let ls = LeastSquares::new(Array1::from(y).view(), m.view())?;
    let full = ls.fit()?;
    let restricted_cols: Vec<usize> = (0..lags.p)
        .chain(lags.p + lags.q..m.ncols())
        .collect();
    let restricted = ls.fit_columns(&restricted_cols)?;
    let (name, idx) = column_name(ds, cause);
    Ok(GcScore::from_vars(name, idx, restricted.resid_var, full.resid_var))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    /// Each predictor conditioned on all remaining predictors.
    #[default]
    Conditional,
    /// Each predictor scored alone against the predictee's own past.
    Pairwise,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcRanking {
    /// Sorted by descending score, ties by schema column index.
    pub scores: Vec<GcScore>,
    pub lag: LagSpec,
    pub aic_trace: Vec<(usize, f64)>,
    pub mode: RankMode,
}

impl GcRanking {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn features(&self) -> Vec<&str> {
        self.scores.iter().map(|s| s.feature.as_str()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("rank,feature,G,restricted_var,full_var\n");
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", i + 1, s.feature, s.g, s.restricted_var, s.full_var);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Reads the feature order back from a ranking CSV (scores only; lag
    /// metadata is not stored in the file).
    pub fn read_feature_order(path: impl AsRef<Path>) -> Result<Vec<String>> {
        let mut rdr = csv::Reader::from_path(path.as_ref())?;
        let headers = rdr.headers()?.clone();
        let col = headers
            .iter()
            .position(|h| h == "feature")
            .ok_or_else(|| Error::Schema("ranking file lacks a 'feature' column".into()))?;
        let mut names = Vec::new();
        for rec in rdr.records() {
            names.push(rec?.get(col).unwrap_or("").to_string());
        }
        Ok(names)
    }
}

fn sort_scores(scores: &mut [GcScore]) {
    scores.sort_by(|a, b| b.g.total_cmp(&a.g).then(a.column.cmp(&b.column)));
}

fn predictors_of(ds: &CrashDataset, target: Column) -> Vec<Column> {
    (0..ds.n_features())
        .map(Column::Feature)
        .filter(|&c| c != target)
        .collect()
}

/// Scores every predictor (every feature other than `target`) and ranks them.
pub fn rank_predictors(ds: &CrashDataset, target: Column, lags: LagSpec, mode: RankMode) -> Result<GcRanking> {
    check_columns(ds, &[target])?;
    let predictors = predictors_of(ds, target);
    if predictors.is_empty() {
        return Err(Error::InvalidArgument("no predictors to rank".into()));
    }
    let mut scores = match mode {
        RankMode::Conditional if lags.q == lags.r => shared_conditional_scores(ds, target, &predictors, lags)?,
        RankMode::Conditional => predictors
            .par_iter()
            .map(|&c| {
                let others: Vec<Column> = predictors.iter().copied().filter(|&z| z != c).collect();
                gc_score(ds, target, c, &others, lags)
            })
            .collect::<Result<Vec<_>>>()?,
        RankMode::Pairwise => predictors
            .par_iter()
            .map(|&c| gc_score(ds, target, c, &[], lags))
            .collect::<Result<Vec<_>>>()?,
    };
    sort_scores(&mut scores);
    Ok(GcRanking {
        scores,
        lag: lags,
        aic_trace: Vec::new(),
        mode,
    })
}

/// With `q == r` every full model is the same all-variables regression, so
/// it is fitted once and each restricted model drops one predictor's block.
fn shared_conditional_scores(
    ds: &CrashDataset,
    target: Column,
    predictors: &[Column],
    lags: LagSpec,
) -> Result<Vec<GcScore>> {
    if lags.q == 0 {
        return Err(Error::Config("restricted and full designs coincide (q = 0)".into()));
    }
    let mut blocks = vec![(target, lags.p)];
    blocks.extend(predictors.iter().map(|&c| (c, lags.q)));
    let (y, m) = lagged_matrix(ds, target, &blocks, lags.max_lag())?;
    let ls = LeastSquares::new(Array1::from(y).view(), m.view())?;
    let full = ls.fit()?;
    let width = m.ncols();
    predictors
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let start = lags.p + i * lags.q;
            let cols: Vec<usize> = (0..start).chain(start + lags.q..width).collect();
            let restricted = ls.fit_columns(&cols)?;
            let (name, idx) = column_name(ds, c);
            Ok(GcScore::from_vars(name, idx, restricted.resid_var, full.resid_var))
        })
        .collect()
}

/// Selects the uniform lag by AIC on the all-variables model, then ranks.
pub fn rank_predictors_auto(ds: &CrashDataset, target: Column, max_lag: usize, mode: RankMode) -> Result<GcRanking> {
    let predictors = predictors_of(ds, target);
    let selection = select_lag_aic(ds, target, &predictors, max_lag)?;
    let mut ranking = rank_predictors(ds, target, LagSpec::uniform(selection.best_lag), mode)?;
    ranking.aic_trace = selection.aic_trace;
    Ok(ranking)
}

/// Column indices of the first `k` ranked predictors.
pub fn select_top_k(ranking: &GcRanking, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > ranking.len() {
        return Err(Error::InvalidArgument(format!(
            "top-k {k} outside 1..={}",
            ranking.len()
        )));
    }
    Ok(ranking.scores[..k].iter().map(|s| s.column).collect())
}
