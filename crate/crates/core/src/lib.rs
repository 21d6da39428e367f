//! Granger-causal ranking of crash-severity predictors and multiclass
//! severity classifiers for imbalanced tabular crash data.

pub mod balance;
pub mod causality;
pub mod charts;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod synthgen;

pub use balance::{balance_classes, balance_classes_with, BalanceOptions, BalanceReport};
pub use causality::{gc_score, rank_predictors, select_top_k, GcRanking, GcScore, LagSpec, RankMode};
pub use error::{Error, Result};
pub use evaluate::{compare_reduced_full, confusion, metrics, normalize_rows, ComparisonReport, ConfusionMatrix};
pub use ingest::{load_csv, split_train_test, Column, CrashDataset, FeatureKind, FeatureSchema, SeverityClass, SplitPair};
pub use learners::{train, Classifier, LearnerKind, TrainConfig, TrainedModel};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use synthgen::{generate, SynthSpec};
