//! End-to-end run: ingest, split, rank, select, balance, train, evaluate,
//! and write the report bundle.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balance::{balance_classes_with, BalanceOptions, BalanceReport, DEFAULT_K_NEIGHBORS};
use crate::causality::{
    rank_predictors, rank_predictors_auto, GcRanking, LagSpec, RankMode, DEFAULT_LAG, DEFAULT_MAX_LAG, DEFAULT_TOP_K,
};
use crate::charts::{confusion_heatmap, ranking_bar_chart};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, reduced_columns, ComparisonReport};
use crate::ingest::{
    infer_schema, load_csv, split_train_test, summarize, Column, CrashDataset, FeatureSchema, Lineage, LoadOptions,
    SeverityClass,
    SEVERITY_COLUMN,
};
use crate::learners::{self, BoostConfig, ForestConfig, LearnerKind, MlpConfig, TrainConfig, TreeConfig};

/// Fixed lag order, or AIC selection up to `max_lag`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LagRepr", into = "LagRepr")]
pub enum LagMode {
    Fixed(usize),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LagRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<LagRepr> for LagMode {
    type Error = String;

    fn try_from(r: LagRepr) -> std::result::Result<Self, String> {
        match r {
            LagRepr::Fixed(l) => Ok(LagMode::Fixed(l)),
            LagRepr::Named(s) if s == "auto" => Ok(LagMode::Auto),
            LagRepr::Named(s) => Err(format!("lag must be a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<LagMode> for LagRepr {
    fn from(m: LagMode) -> Self {
        match m {
            LagMode::Fixed(l) => LagRepr::Fixed(l),
            LagMode::Auto => LagRepr::Named("auto".into()),
        }
    }
}

impl std::str::FromStr for LagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LagMode::Auto);
        }
        s.parse()
            .map(LagMode::Fixed)
            .map_err(|_| Error::Config(format!("lag must be a positive integer or \"auto\", got {s:?}")))
    }
}

/// Which training data the causal ranking sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankData {
    /// The imbalanced training split, before oversampling.
    #[default]
    Train,
    /// The balanced training set, synthetic rows included.
    Balanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: PathBuf,
    /// Schema file; inferred from the data when absent.
    pub schema: Option<PathBuf>,
    pub severity_column: String,
    pub timestamp_column: Option<String>,
    pub fraction: f64,
    pub lag: LagMode,
    pub max_lag: usize,
    pub top_k: usize,
    pub mode: RankMode,
    pub rank_on: RankData,
    pub balance_k: usize,
    pub round_binary: bool,
    pub dt: TreeConfig,
    pub rf: ForestConfig,
    pub xgb: BoostConfig,
    pub dnn: MlpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            data: PathBuf::from("data.csv"),
            schema: None,
            severity_column: SEVERITY_COLUMN.to_string(),
            timestamp_column: None,
            fraction: 0.8,
            lag: LagMode::Fixed(DEFAULT_LAG),
            max_lag: DEFAULT_MAX_LAG,
            top_k: DEFAULT_TOP_K,
            mode: RankMode::Conditional,
            rank_on: RankData::Train,
            balance_k: DEFAULT_K_NEIGHBORS,
            round_binary: false,
            dt: TreeConfig::default(),
            rf: ForestConfig::default(),
            xgb: BoostConfig::default(),
            dnn: MlpConfig::default(),
        }
    }
}

/// Key under which run facts are stored in the manifest.
const RUN_TABLE: &str = "run";

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.to_string())),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Reads the configuration back out of a manifest, ignoring run facts.
    pub fn from_manifest(s: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        table.remove(RUN_TABLE);
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return bad("fraction must lie strictly between 0 and 1");
        }
        if self.lag == LagMode::Fixed(0) {
            return bad("lag must be >= 1");
        }
        if self.max_lag == 0 {
            return bad("max_lag must be >= 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        if self.balance_k == 0 {
            return bad("balance_k must be >= 1");
        }
        if self.rf.estimators == 0 {
            return bad("rf.estimators must be >= 1");
        }
        if self.dnn.batch == 0 || self.dnn.layers.iter().any(|&w| w == 0) {
            return bad("dnn.batch and every dnn layer width must be >= 1");
        }
        Ok(())
    }

    /// Every setting as sorted `key = value` lines, sections flattened into
    /// dotted keys. The output parses back as TOML.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let table = toml::Table::try_from(self).expect("config serializes to a table");
        let mut out = Vec::new();
        flatten("", &table, &mut out);
        out
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            dt: self.dt.clone(),
            rf: self.rf.clone(),
            xgb: self.xgb.clone(),
            dnn: self.dnn.clone(),
        }
    }

    pub fn balance_options(&self) -> BalanceOptions {
        BalanceOptions {
            k_neighbors: self.balance_k,
            seed: self.seed,
            round_binary: self.round_binary,
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            severity_column: self.severity_column.clone(),
            timestamp_column: self.timestamp_column.clone(),
        }
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub ranking: GcRanking,
    pub reduced_features: Vec<String>,
    pub balance: BalanceReport,
    pub comparisons: Vec<ComparisonReport>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub manifest: String,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Default)]
struct RunFacts {
    lines: Vec<(String, String)>,
}

impl RunFacts {
    fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        let v: toml::Value = value.into();
        self.lines.push((format!("{RUN_TABLE}.{key}"), v.to_string()));
    }
}

fn render_manifest(config: &PipelineConfig, facts: &RunFacts) -> String {
    let mut s = String::new();
    for (k, v) in config.to_key_values().iter().chain(&facts.lines) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn write_artifact(out_dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

pub const METRICS_HEADER: &str =
    "algo,variant,rows,accuracy,macro_f1,PDO_recall,BC_recall,KA_recall,PDO_precision,BC_precision,KA_precision,PDO_f1,BC_f1,KA_f1";

/// One row per algorithm and variant, fixed six decimals.
pub fn metrics_csv(comparisons: &[ComparisonReport]) -> String {
    let mut s = String::new();
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for cmp in comparisons {
        for (variant, ev) in [("full", &cmp.full), ("reduced", &cmp.reduced)] {
            let m = &ev.metrics;
            let _ = write!(
                s,
                "{},{},{},{:.6},{:.6}",
                cmp.algo.code(),
                variant,
                ev.confusion.total(),
                m.accuracy,
                m.macro_f1
            );
            for field in 0..3 {
                for c in &m.per_class {
                    let v = [c.recall, c.precision, c.f1][field];
                    let _ = write!(s, ",{v:.6}");
                }
            }
            s.push('\n');
        }
    }
    s
}

fn load_data(config: &PipelineConfig) -> Result<CrashDataset> {
    let opts = config.load_options();
    let schema = match &config.schema {
        Some(p) => FeatureSchema::from_csv(p)?,
        None => infer_schema(&config.data, &opts)?,
    };
    load_csv(&config.data, &schema, &opts)
}

fn rank(config: &PipelineConfig, data: &CrashDataset) -> Result<GcRanking> {
    if data.lineage() == Lineage::TestSplit {
        return Err(Error::Lineage("ranking must not see the test split".into()));
    }
    match config.lag {
        LagMode::Fixed(l) => rank_predictors(data, Column::Severity, LagSpec::uniform(l), config.mode),
        LagMode::Auto => rank_predictors_auto(data, Column::Severity, config.max_lag, config.mode),
    }
}

/// Runs every stage and writes the report bundle into `out_dir`. On failure
/// a manifest naming the failed stage is still written.
pub fn run_pipeline(config: &PipelineConfig, out_dir: impl AsRef<Path>) -> Result<PipelineReport> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut facts = RunFacts::default();
    let result = run_stages(config, out_dir, &mut facts);
    match &result {
        Ok(_) => facts.set("status", "ok"),
        Err(e) => {
            facts.set("status", "failed");
            if let Error::Stage { stage, source } = e {
                facts.set("failed_stage", *stage);
                facts.set("error", source.to_string());
            } else {
                facts.set("error", e.to_string());
            }
        }
    }
    let manifest = render_manifest(config, &facts);
    let path = out_dir.join("manifest.txt");
    std::fs::write(&path, &manifest).map_err(|e| Error::io(&path, e))?;
    let mut report = result?;
    report.manifest = manifest;
    report.artifacts.push(path);
    Ok(report)
}

fn run_stages(config: &PipelineConfig, out_dir: &Path, facts: &mut RunFacts) -> Result<PipelineReport> {
    let mut written = Vec::new();
    stage("config", config.validate())?;

    let data = stage("ingest", load_data(config))?;
    facts.set("rows", data.n_rows() as i64);
    facts.set("features", data.n_features() as i64);
    let summary = stage("ingest", summarize(&data))?;
    stage("report", write_artifact(out_dir, "summary.csv", &summary.to_csv_string(), &mut written))?;

    let split = stage("split", split_train_test(&data, config.fraction, config.seed))?;
    facts.set("train_rows", split.train.n_rows() as i64);
    facts.set("test_rows", split.test.n_rows() as i64);

    let balance_opts = config.balance_options();
    let mut balanced = None;
    let ranking = match config.rank_on {
        RankData::Train => stage("rank", rank(config, &split.train))?,
        RankData::Balanced => {
            let b = stage("balance", balance_classes_with(&split.train, &balance_opts))?;
            let r = stage("rank", rank(config, &b.0))?;
            balanced = Some(b);
            r
        }
    };
    facts.set("rank_on", match config.rank_on {
        RankData::Train => "train",
        RankData::Balanced => "balanced",
    });
    facts.set("lag_selected", ranking.lag.q as i64);
    stage("report", write_artifact(out_dir, "ranking.csv", &ranking.to_csv_string(), &mut written))?;
    let chart = ranking_bar_chart(&ranking, "Granger causality ranking of predictors");
    stage("report", write_artifact(out_dir, "ranking.svg", &chart, &mut written))?;

    let reduced_cols = stage("select", reduced_columns(&ranking, config.top_k))?;
    let reduced_features: Vec<String> = reduced_cols.iter().map(|&c| data.schema().name(c).to_string()).collect();
    facts.set(
        "reduced_features",
        toml::Value::Array(reduced_features.iter().map(|s| toml::Value::from(s.as_str())).collect()),
    );

    let (balanced, balance_report) = match balanced {
        Some(b) => b,
        None => stage("balance", balance_classes_with(&split.train, &balance_opts))?,
    };
    let counts = |c: [usize; 3]| toml::Value::Array(c.iter().map(|&v| toml::Value::from(v as i64)).collect());
    facts.set("balance_before", counts(balance_report.before));
    facts.set("balance_after", counts(balance_report.after));
    stage("report", write_artifact(out_dir, "balance.txt", &balance_report.to_text(), &mut written))?;

    let reduced_train = stage("select", balanced.select_features(&reduced_cols))?;
    let train_cfg = config.train_config();
    let mut comparisons = Vec::with_capacity(LearnerKind::ALL.len());
    for algo in LearnerKind::ALL {
        log::info!("training {algo}");
        let full_model = stage("train", learners::train(algo, &balanced, &train_cfg))?;
        let reduced_model = stage("train", learners::train(algo, &reduced_train, &train_cfg))?;
        let full = stage("evaluate", evaluate_model(&full_model, &split.test))?;
        let reduced = stage("evaluate", evaluate_model(&reduced_model, &split.test))?;
        comparisons.push(ComparisonReport::new(algo, full, reduced, reduced_features.clone()));
    }

    let mut comparison_text = String::new();
    for cmp in &comparisons {
        comparison_text.push_str(&cmp.to_text());
        comparison_text.push('\n');
        for (variant, ev) in [("full", &cmp.full), ("reduced", &cmp.reduced)] {
            let title = format!("{} ({variant})", cmp.algo.display_name());
            let svg = confusion_heatmap(&ev.normalized, &title);
            let name = format!("confusion_{}_{variant}.svg", cmp.algo.code());
            stage("report", write_artifact(out_dir, &name, &svg, &mut written))?;
        }
    }
    stage("report", write_artifact(out_dir, "comparison.txt", &comparison_text, &mut written))?;
    stage("report", write_artifact(out_dir, "metrics.csv", &metrics_csv(&comparisons), &mut written))?;
    for cmp in &comparisons {
        for cls in SeverityClass::ALL {
            facts.set(
                &format!("recall_delta.{}.{}", cmp.algo.code(), cls.label()),
                format!("{:+.6}", cmp.recall_delta[cls.index()]),
            );
        }
    }

    Ok(PipelineReport {
        ranking,
        reduced_features,
        balance: balance_report,
        comparisons,
        train_rows: split.train.n_rows(),
        test_rows: split.test.n_rows(),
        manifest: String::new(),
        artifacts: written,
    })
}
