use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crashcause_core::balance::{balance_classes_with, BalanceOptions};
use crashcause_core::causality::{rank_predictors, rank_predictors_auto, select_top_k, GcRanking, LagSpec, RankMode};
use crashcause_core::charts::{confusion_heatmap, ranking_bar_chart};
use crashcause_core::evaluate::evaluate_model;
use crashcause_core::ingest::{
    infer_schema, load_csv, split_train_test, summarize, write_csv, Column, CrashDataset, FeatureSchema, LoadOptions,
};
use crashcause_core::learners::{self, LearnerKind, TrainConfig, TrainedModel};
use crashcause_core::pipeline::{run_pipeline, LagMode, PipelineConfig, RankData};
use crashcause_core::synthgen::{generate_with_truth, SynthSpec};

#[derive(Parser)]
#[command(name = "crashcause", version, about = "Granger-causal predictor ranking and crash-severity classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Crash table (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Schema CSV (name,kind,units); inferred from the data when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value = "severity")]
    severity_column: String,
    /// Sort rows by this column before use.
    #[arg(long)]
    timestamp_column: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<CrashDataset> {
        let opts = LoadOptions {
            severity_column: self.severity_column.clone(),
            timestamp_column: self.timestamp_column.clone(),
        };
        let schema = match &self.schema {
            Some(p) => FeatureSchema::from_csv(p)?,
            None => infer_schema(&self.data, &opts)?,
        };
        load_csv(&self.data, &schema, &opts).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Conditional,
    Pairwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankOnArg {
    Train,
    Balanced,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a table, write summary statistics.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        summary: PathBuf,
        /// Also write the (possibly inferred) schema.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// Seeded train/test split.
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Rank predictors of severity by conditional Granger causality.
    Rank {
        #[command(flatten)]
        data: DataArgs,
        /// Lag order, or `auto` for AIC selection.
        #[arg(long, default_value = "4")]
        lag: String,
        #[arg(long, default_value_t = 8)]
        max_lag: usize,
        /// Print the names of the top k predictors.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, value_enum, default_value_t = ModeArg::Conditional)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        chart: Option<PathBuf>,
    },
    /// Balance classes with undersampling and SMOTE.
    Balance {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Round interpolated binary features to 0/1.
        #[arg(long)]
        round_binary: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train one classifier and save it.
    Train {
        #[arg(long)]
        algo: LearnerKind,
        #[command(flatten)]
        data: DataArgs,
        /// `all` or `top:<k>` (needs --ranking).
        #[arg(long, default_value = "all")]
        features: String,
        /// Ranking CSV written by `rank`.
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Learner settings (TOML with seed and [dt]/[rf]/[xgb]/[dnn] sections).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Evaluate a saved model on held-out data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value = "severity")]
        severity_column: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Generate synthetic data with planted causes.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// End-to-end runs.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Run every stage and write the report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the ranking data from the config.
        #[arg(long, value_enum)]
        rank_on: Option<RankOnArg>,
    },
    /// Print the default configuration.
    Defaults,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_features(spec: &str) -> Result<Option<usize>> {
    if spec == "all" {
        return Ok(None);
    }
    match spec.strip_prefix("top:").map(str::parse::<usize>) {
        Some(Ok(k)) if k > 0 => Ok(Some(k)),
        _ => bail!("--features must be `all` or `top:<k>` with k >= 1, got {spec:?}"),
    }
}

fn print_ranking(ranking: &GcRanking, top: Option<usize>) -> Result<()> {
    if let Some(k) = top {
        let cols = select_top_k(ranking, k)?;
        let names: Vec<&str> = cols
            .iter()
            .map(|c| ranking.scores.iter().find(|s| s.column == *c).map_or("", |s| s.feature.as_str()))
            .collect();
        println!("{}", names.join(","));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            data,
            summary,
            schema_out,
        } => {
            let ds = data.load()?;
            write_text(&summary, &summarize(&ds)?.to_csv_string())?;
            if let Some(p) = schema_out {
                ds.schema().write_csv(p)?;
            }
            let c = ds.class_counts();
            println!("rows={} features={} PDO={} BC={} KA={}", ds.n_rows(), ds.n_features(), c[0], c[1], c[2]);
        }
        Command::Split {
            data,
            fraction,
            seed,
            train,
            test,
        } => {
            let pair = split_train_test(&data.load()?, fraction, seed)?;
            write_csv(&pair.train, train)?;
            write_csv(&pair.test, test)?;
            println!("train={} test={}", pair.train.n_rows(), pair.test.n_rows());
        }
        Command::Rank {
            data,
            lag,
            max_lag,
            top,
            mode,
            out,
            chart,
        } => {
            let ds = data.load()?;
            let mode = match mode {
                ModeArg::Conditional => RankMode::Conditional,
                ModeArg::Pairwise => RankMode::Pairwise,
            };
            let ranking = match lag.parse::<LagMode>()? {
                LagMode::Fixed(l) => rank_predictors(&ds, Column::Severity, LagSpec::new(l, l, l)?, mode)?,
                LagMode::Auto => rank_predictors_auto(&ds, Column::Severity, max_lag, mode)?,
            };
            ranking.write_csv(&out)?;
            if let Some(p) = chart {
                write_text(&p, &ranking_bar_chart(&ranking, "Granger causality ranking of predictors"))?;
            }
            log::info!("lag order {}", ranking.lag.q);
            print_ranking(&ranking, top)?;
        }
        Command::Balance {
            data,
            k,
            seed,
            round_binary,
            out,
            report,
        } => {
            let ds = data.load()?;
            let opts = BalanceOptions {
                k_neighbors: k,
                seed,
                round_binary,
            };
            let (balanced, rep) = balance_classes_with(&ds, &opts)?;
            write_csv(&balanced, out)?;
            if let Some(p) = report {
                write_text(&p, &rep.to_text())?;
            }
            let c = rep.after;
            println!("PDO={} BC={} KA={} synthetic={}", c[0], c[1], c[2], rep.synthetic_rows);
        }
        Command::Train {
            algo,
            data,
            features,
            ranking,
            config,
            model_out,
        } => {
            let mut ds = data.load()?;
            if let Some(k) = parse_features(&features)? {
                let Some(path) = ranking else {
                    bail!("--features top:<k> needs --ranking");
                };
                let order = GcRanking::read_feature_order(&path)?;
                if k > order.len() {
                    bail!("top:{k} exceeds the {} ranked features", order.len());
                }
                let mut cols: Vec<usize> = order[..k]
                    .iter()
                    .map(|n| ds.schema().index_of(n).with_context(|| format!("ranked feature {n} not in data")))
                    .collect::<Result<_>>()?;
                cols.sort_unstable();
                ds = ds.select_features(&cols)?;
            }
            let cfg = match config {
                Some(p) => TrainConfig::from_file(p)?,
                None => TrainConfig::default(),
            };
            let model = learners::train(algo, &ds, &cfg)?;
            model.save(&model_out)?;
            println!("{} trained on {} rows, {} features", algo.display_name(), ds.n_rows(), ds.n_features());
        }
        Command::Evaluate {
            model,
            test,
            schema,
            severity_column,
            out,
            matrix,
        } => {
            let model = TrainedModel::load(&model)?;
            let data = DataArgs {
                data: test,
                schema,
                severity_column,
                timestamp_column: None,
            };
            let ev = evaluate_model(&model, &data.load()?)?;
            write_text(&out, &ev.to_text())?;
            if let Some(p) = matrix {
                let title = model.kind().display_name();
                write_text(&p, &confusion_heatmap(&ev.normalized, title))?;
            }
            println!("accuracy={:.4} macro_f1={:.4}", ev.metrics.accuracy, ev.metrics.macro_f1);
        }
        Command::Synth { spec, out, truth } => {
            let spec = match spec {
                Some(p) => SynthSpec::from_file(p)?,
                None => SynthSpec::default(),
            };
            let (ds, t) = generate_with_truth(&spec)?;
            write_csv(&ds, out)?;
            if let Some(p) = truth {
                write_text(&p, &t.to_text())?;
            }
        }
        Command::Pipeline { command } => match command {
            PipelineCommand::Run { config, out, rank_on } => {
                let mut cfg = PipelineConfig::from_file(&config)?;
                if let Some(r) = rank_on {
                    cfg.rank_on = match r {
                        RankOnArg::Train => RankData::Train,
                        RankOnArg::Balanced => RankData::Balanced,
                    };
                }
                let report = run_pipeline(&cfg, &out)?;
                println!("top {}: {}", report.reduced_features.len(), report.reduced_features.join(","));
                for c in &report.comparisons {
                    println!(
                        "{:<4} full acc={:.4} reduced acc={:.4}",
                        c.algo.code(),
                        c.full.metrics.accuracy,
                        c.reduced.metrics.accuracy
                    );
                }
                println!("wrote {} artifacts to {}", report.artifacts.len(), out.display());
            }
            PipelineCommand::Defaults => {
                for (k, v) in PipelineConfig::default().to_key_values() {
                    println!("{k} = {v}");
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
