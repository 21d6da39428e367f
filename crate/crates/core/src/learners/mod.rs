//! Multiclass severity classifiers: CART tree, random forest, Newton-boosted
//! trees and a feed-forward network. All return probability triples in
//! class-code order (PDO, BC, KA).

pub mod boost;
pub mod forest;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CrashDataset;

pub use boost::{train_gradient_boost, BoostModel};
pub use forest::{train_random_forest, RandomForestModel};
pub use mlp::{mlp_train, MlpGradients, MlpModel};
pub use tree::{best_split, train_decision_tree, DecisionTreeModel, SplitCandidate};

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn n_features(&self) -> usize;

    fn proba_row(&self, x: &[f64]) -> [f64; 3];

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.ncols(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), 3));
        for (i, row) in x.outer_iter().enumerate() {
            let r = row.to_vec();
            let p = self.proba_row(&r);
            for c in 0..3 {
                out[[i, c]] = p[c];
            }
        }
        Ok(out)
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.outer_iter().map(|r| argmax(r.as_slice().expect("row-major"))).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "dt")]
    DecisionTree,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "xgb")]
    GradientBoost,
    #[serde(rename = "dnn")]
    Mlp,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::DecisionTree,
        LearnerKind::RandomForest,
        LearnerKind::GradientBoost,
        LearnerKind::Mlp,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LearnerKind::DecisionTree => "dt",
            LearnerKind::RandomForest => "rf",
            LearnerKind::GradientBoost => "xgb",
            LearnerKind::Mlp => "dnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            LearnerKind::DecisionTree => "Decision Tree",
            LearnerKind::RandomForest => "Random Forest",
            LearnerKind::GradientBoost => "XGBoost",
            LearnerKind::Mlp => "DNN",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown learner '{s}' (dt|rf|xgb|dnn)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub estimators: usize,
    /// Features drawn per node; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            estimators: 1000,
            features_per_split: None,
            bootstrap: true,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub rounds: usize,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_hessian: f64,
    /// Initial score shared by all three classes.
    pub base_score: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: 100,
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 6,
            min_child_hessian: 1.0,
            base_score: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    /// Hidden layer widths; input and output widths come from the data.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layers: vec![128, 128, 128, 64],
            epochs: 150,
            batch: 2048,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Hyperparameters for every learner plus the seed they share.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub dt: TreeConfig,
    pub rf: ForestConfig,
    pub xgb: BoostConfig,
    pub dnn: MlpConfig,
}

impl TrainConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", content = "model")]
pub enum ModelBody {
    #[serde(rename = "dt")]
    DecisionTree(DecisionTreeModel),
    #[serde(rename = "rf")]
    RandomForest(RandomForestModel),
    #[serde(rename = "xgb")]
    GradientBoost(BoostModel),
    #[serde(rename = "dnn")]
    Mlp(MlpModel),
}

pub const MODEL_FORMAT: &str = "crashcause-model";
pub const MODEL_VERSION: u32 = 1;

/// A trained learner together with the feature names it consumes, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub features: Vec<String>,
    #[serde(flatten)]
    pub body: ModelBody,
}

impl TrainedModel {
    pub fn kind(&self) -> LearnerKind {
        match self.body {
            ModelBody::DecisionTree(_) => LearnerKind::DecisionTree,
            ModelBody::RandomForest(_) => LearnerKind::RandomForest,
            ModelBody::GradientBoost(_) => LearnerKind::GradientBoost,
            ModelBody::Mlp(_) => LearnerKind::Mlp,
        }
    }

    fn classifier(&self) -> &dyn Classifier {
        match &self.body {
            ModelBody::DecisionTree(m) => m,
            ModelBody::RandomForest(m) => m,
            ModelBody::GradientBoost(m) => m,
            ModelBody::Mlp(m) => m,
        }
    }

    /// Probabilities for a dataset; columns are matched by feature name.
    pub fn predict_dataset(&self, ds: &CrashDataset) -> Result<Array2<f64>> {
        let view = ds.select_features_by_name(&self.features)?;
        self.predict_proba(view.x().view())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedModel = serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Serialization(format!("unexpected format tag '{}'", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(Error::Serialization(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

impl Classifier for TrainedModel {
    fn n_features(&self) -> usize {
        self.classifier().n_features()
    }

    fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        self.classifier().proba_row(x)
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.classifier().predict_proba(x)
    }
}

/// Trains one learner on every feature of `train`.
pub fn train(kind: LearnerKind, train: &CrashDataset, config: &TrainConfig) -> Result<TrainedModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = train.x().view();
    let y = train.labels();
    let body = match kind {
        LearnerKind::DecisionTree => ModelBody::DecisionTree(train_decision_tree(x, &y, &config.dt)?),
        LearnerKind::RandomForest => ModelBody::RandomForest(train_random_forest(x, &y, &config.rf, config.seed)?),
        LearnerKind::GradientBoost => ModelBody::GradientBoost(train_gradient_boost(x, &y, &config.xgb)?),
        LearnerKind::Mlp => ModelBody::Mlp(mlp_train(x, &y, &config.dnn, config.seed)?),
    };
    Ok(TrainedModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        features: train.schema().names().into_iter().map(String::from).collect(),
        body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lower() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn learner_codes_round_trip() {
        for k in LearnerKind::ALL {
            assert_eq!(k.code().parse::<LearnerKind>().unwrap(), k);
        }
        assert!("svm".parse::<LearnerKind>().is_err());
    }

    #[test]
    fn defaults_match_reference_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.rf.estimators, 1000);
        assert_eq!(c.dnn.layers, vec![128, 128, 128, 64]);
        assert_eq!((c.dnn.epochs, c.dnn.batch), (150, 2048));
        assert_eq!(c.xgb.rounds, 100);
    }
}
