//! Confusion matrices, per-class metrics and reduced-vs-full comparisons.

use std::fmt::Write as _;

use serde::Serialize;

use crate::balance::{balance_classes_with, BalanceOptions};
use crate::causality::{select_top_k, GcRanking};
use crate::error::{Error, Result};
use crate::ingest::{CrashDataset, Lineage, SeverityClass, SplitPair};
use crate::learners::{self, argmax, LearnerKind, TrainConfig, TrainedModel};

/// Rows are true classes, columns predicted classes, both in code order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_total(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion(truth: &[usize], pred: &[usize]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        if t > 2 || p > 2 {
            return Err(Error::InvalidArgument(format!("class index out of range: true {t}, predicted {p}")));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalizedMatrix {
    pub values: [[f64; 3]; 3],
    /// Rows with no true samples; their values are all zero.
    pub empty_rows: [bool; 3],
}

/// Divides each row by its total (true-class conditional rates).
pub fn normalize_rows(cm: &ConfusionMatrix) -> NormalizedMatrix {
    let mut values = [[0.0; 3]; 3];
    let mut empty_rows = [false; 3];
    for r in 0..3 {
        let t = cm.row_total(r);
        if t == 0 {
            empty_rows[r] = true;
            continue;
        }
        for c in 0..3 {
            values[r][c] = cm.counts[r][c] as f64 / t as f64;
        }
    }
    NormalizedMatrix { values, empty_rows }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when the corresponding ratio had a zero denominator and was reported as 0.
    pub recall_undefined: bool,
    pub precision_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: [ClassMetrics; 3],
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut per_class = [ClassMetrics::default(); 3];
    for (c, m) in per_class.iter_mut().enumerate() {
        let tp = cm.counts[c][c];
        (m.recall, m.recall_undefined) = ratio(tp, cm.row_total(c));
        (m.precision, m.precision_undefined) = ratio(tp, cm.col_total(c));
        let s = m.precision + m.recall;
        if s > 0.0 {
            m.f1 = 2.0 * m.precision * m.recall / s;
        } else {
            m.f1 = 0.0;
            m.f1_undefined = true;
        }
    }
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0,
        per_class,
    })
}

/// One-vs-rest ROC AUC per class from predicted probabilities (rank
/// statistic, ties counted half). `None` when a class has no positives or
/// no negatives.
pub fn auc_one_vs_rest(probs: &ndarray::Array2<f64>, truth: &[usize]) -> [Option<f64>; 3] {
    let mut out = [None; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut scored: Vec<(f64, bool)> = truth
            .iter()
            .enumerate()
            .map(|(i, &t)| (probs[[i, c]], t == c))
            .collect();
        let pos = scored.iter().filter(|s| s.1).count();
        let neg = scored.len() - pos;
        if pos == 0 || neg == 0 {
            continue;
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rank_sum = 0.0;
        let mut i = 0;
        while i < scored.len() {
            let mut j = i;
            while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
                j += 1;
            }
            let avg_rank = (i + j) as f64 / 2.0 + 1.0;
            rank_sum += avg_rank * scored[i..=j].iter().filter(|s| s.1).count() as f64;
            i = j + 1;
        }
        let (p, n) = (pos as f64, neg as f64);
        *slot = Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub normalized: NormalizedMatrix,
    pub metrics: MetricsReport,
}

impl Evaluation {
    pub fn from_predictions(truth: &[usize], pred: &[usize]) -> Result<Self> {
        let confusion = confusion(truth, pred)?;
        Ok(Evaluation {
            normalized: normalize_rows(&confusion),
            metrics: metrics(&confusion)?,
            confusion,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.metrics;
        let _ = writeln!(s, "rows={}", self.confusion.total());
        let _ = writeln!(s, "accuracy={:.6}", m.accuracy);
        let _ = writeln!(s, "macro_f1={:.6}", m.macro_f1);
        for cls in SeverityClass::ALL {
            let c = &m.per_class[cls.index()];
            let flag = |b: bool| if b { " (undefined)" } else { "" };
            let _ = writeln!(s, "{}.recall={:.6}{}", cls.label(), c.recall, flag(c.recall_undefined));
            let _ = writeln!(s, "{}.precision={:.6}{}", cls.label(), c.precision, flag(c.precision_undefined));
            let _ = writeln!(s, "{}.f1={:.6}{}", cls.label(), c.f1, flag(c.f1_undefined));
        }
        let _ = writeln!(s, "confusion (rows=true, cols=predicted; PDO BC KA):");
        for r in 0..3 {
            let counts = &self.confusion.counts[r];
            let _ = writeln!(
                s,
                "  {:>3} {:>8} {:>8} {:>8}   normalized {:.4} {:.4} {:.4}{}",
                SeverityClass::ALL[r].label(),
                counts[0],
                counts[1],
                counts[2],
                self.normalized.values[r][0],
                self.normalized.values[r][1],
                self.normalized.values[r][2],
                if self.normalized.empty_rows[r] { " (empty row)" } else { "" }
            );
        }
        s
    }
}

/// Evaluates a model on held-out rows. Synthetic rows are refused.
pub fn evaluate_model(model: &TrainedModel, test: &CrashDataset) -> Result<Evaluation> {
    if test.n_synthetic() > 0 {
        return Err(Error::Lineage(format!(
            "evaluation data contains {} synthetic rows",
            test.n_synthetic()
        )));
    }
    if matches!(test.lineage(), Lineage::TrainSplit | Lineage::Balanced) {
        return Err(Error::Lineage(format!("refusing to evaluate on {:?} data", test.lineage())));
    }
    let probs = model.predict_dataset(test)?;
    let pred: Vec<usize> = probs
        .outer_iter()
        .map(|r| argmax(r.as_slice().expect("row-major")))
        .collect();
    Evaluation::from_predictions(&test.labels(), &pred)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub algo: LearnerKind,
    pub full: Evaluation,
    pub reduced: Evaluation,
    pub reduced_features: Vec<String>,
    /// Reduced minus full recall, per class.
    pub recall_delta: [f64; 3],
}

impl ComparisonReport {
    pub fn new(algo: LearnerKind, full: Evaluation, reduced: Evaluation, reduced_features: Vec<String>) -> Self {
        let mut recall_delta = [0.0; 3];
        for (c, d) in recall_delta.iter_mut().enumerate() {
            *d = reduced.metrics.per_class[c].recall - full.metrics.per_class[c].recall;
        }
        ComparisonReport {
            algo,
            full,
            reduced,
            reduced_features,
            recall_delta,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} ({})", self.algo.display_name(), self.algo.code());
        let _ = writeln!(s, "reduced features ({}): {}", self.reduced_features.len(), self.reduced_features.join(","));
        let _ = writeln!(s, "-- full");
        s.push_str(&self.full.to_text());
        let _ = writeln!(s, "-- reduced");
        s.push_str(&self.reduced.to_text());
        for cls in SeverityClass::ALL {
            let _ = writeln!(s, "recall_delta.{}={:+.6}", cls.label(), self.recall_delta[cls.index()]);
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonConfig {
    pub train: TrainConfig,
    pub balance: BalanceOptions,
}

/// Column indices of the top-`k` features, returned in schema order.
pub fn reduced_columns(ranking: &GcRanking, k: usize) -> Result<Vec<usize>> {
    let mut cols = select_top_k(ranking, k)?;
    cols.sort_unstable();
    Ok(cols)
}

/// Balances the training split once, then trains on all features and on the
/// top-`k` ranked features and evaluates both on the untouched test split.
pub fn compare_reduced_full(
    algo: LearnerKind,
    data: &SplitPair,
    ranking: &GcRanking,
    k: usize,
    config: &ComparisonConfig,
) -> Result<ComparisonReport> {
    let (balanced, _) = balance_classes_with(&data.train, &config.balance)?;
    let cols = reduced_columns(ranking, k)?;
    Ok(compare_on_balanced(algo, &balanced, &data.test, &cols, &config.train)?.0)
}

/// Trained models of one comparison.
pub struct ComparisonModels {
    pub full: TrainedModel,
    pub reduced: TrainedModel,
}

pub fn compare_on_balanced(
    algo: LearnerKind,
    balanced_train: &CrashDataset,
    test: &CrashDataset,
    reduced_cols: &[usize],
    config: &TrainConfig,
) -> Result<(ComparisonReport, ComparisonModels)> {
    if balanced_train.lineage() == Lineage::TestSplit {
        return Err(Error::Lineage("training data is the test split".into()));
    }
    if test.lineage() != Lineage::TestSplit {
        return Err(Error::Lineage(format!("comparison test data has lineage {:?}", test.lineage())));
    }
    let full_model = learners::train(algo, balanced_train, config)?;
    let reduced_train = balanced_train.select_features(reduced_cols)?;
    let reduced_model = learners::train(algo, &reduced_train, config)?;
    let report = ComparisonReport::new(
        algo,
        evaluate_model(&full_model, test)?,
        evaluate_model(&reduced_model, test)?,
        reduced_model.features.clone(),
    );
    Ok((
        report,
        ComparisonModels {
            full: full_model,
            reduced: reduced_model,
        },
    ))
}
