//! Command-line front end and the end-to-end `reproduce` pipeline.

mod pipeline;
mod recipe;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use pipeline::{ensure_dataset, ensure_trained, report_value, reproduce, RunLayout, RunOutputs};
pub use recipe::{load_recipe, parse_recipe, RecipeEval, RunRecipe};

use crate::episode::FrictionLayout;
use crate::error::{Error, Result};
use crate::eval::{compare, evaluate, EvalOptions, MetricReport};
use crate::models::{build_model, resolve_config, Dims, ModelConfig, ModelKind};
use crate::pushsim::{generate_dataset, write_edge_cases, DatasetSpec};
use crate::train::{train, TrainConfig, TrainData};

pub const DATA_ROOT_ENV: &str = "SPOTSLAB_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "spotslab", version, about = "Tactile-visual video prediction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic pushing dataset with train and test splits.
    Generate(GenerateArgs),
    /// Write the four edge-case trials as split `edge`.
    Edgecases(EdgecasesArgs),
    /// Train one model and write its best checkpoint.
    Train(TrainArgs),
    /// Evaluate checkpoints of one model kind (one per seed).
    Evaluate(EvaluateArgs),
    /// Render tables and plots from evaluation reports.
    Compare(CompareArgs),
    /// Run a full experiment recipe end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, env = DATA_ROOT_ENV)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub train_layouts: Vec<FrictionLayout>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub test_layouts: Vec<FrictionLayout>,
    #[arg(long)]
    pub episodes_per_layout: usize,
    /// Defaults to `--episodes-per-layout`.
    #[arg(long)]
    pub test_episodes_per_layout: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reject layouts shared by train and test.
    #[arg(long)]
    pub disjoint: bool,
}

#[derive(Debug, Args)]
pub struct EdgecasesArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tactile_weight: f64,
    #[arg(long, default_value_t = 1)]
    pub window_stride: usize,
    #[arg(long, default_value_t = 2)]
    pub context: usize,
    /// Predicted frames per training window.
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// JSON file with network sizes; defaults to the full-size network.
    #[arg(long)]
    pub dims: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub ckpts: Vec<PathBuf>,
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 15)]
    pub horizon: usize,
    #[arg(long)]
    pub anaesthetise: bool,
    #[arg(long, default_value_t = 1)]
    pub window_stride: usize,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub recipe: PathBuf,
    /// Overrides the recipe's output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_dims(path: &Path) -> Result<Dims> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(path.display().to_string(), "dims", e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let spec = DatasetSpec {
                train_layouts: a.train_layouts,
                test_layouts: a.test_layouts,
                train_per_layout: a.episodes_per_layout,
                test_per_layout: a.test_episodes_per_layout.unwrap_or(a.episodes_per_layout),
                seed: a.seed,
                disjoint: a.disjoint,
            };
            generate_dataset(&spec, &a.out)?;
        }
        Command::Edgecases(a) => {
            write_edge_cases(&a.out)?;
        }
        Command::Train(a) => {
            let dims = a.dims.as_deref().map(read_dims).transpose()?.unwrap_or_default();
            let config = resolve_config(&ModelConfig {
                kind: a.model,
                dims,
                context: a.context,
                horizon: a.horizon,
                beta: a.beta,
                tactile_loss_weight: a.tactile_weight,
            })?;
            let tc = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch_size,
                learning_rate: a.learning_rate,
                beta: a.beta,
                tactile_loss_weight: a.tactile_weight,
                seed: a.seed,
                window_stride: a.window_stride,
                ..TrainConfig::default()
            };
            let data = TrainData::from_split(&a.data, config.context, config.last(), &tc)?;
            let outcome = train(build_model(&config, a.seed)?, &data, &tc, &a.out)?;
            log::info!("best epoch {:?}, checkpoint {}", outcome.best_epoch, outcome.checkpoint.display());
        }
        Command::Evaluate(a) => {
            let opts = EvalOptions {
                horizon: a.horizon,
                anaesthetise: a.anaesthetise,
                window_stride: a.window_stride,
                label: a.label,
                ..EvalOptions::default()
            };
            let report = evaluate(&a.ckpts, &a.data, &a.split, &opts)?;
            report.save(&a.out)?;
            log::info!("wrote {}", a.out.display());
        }
        Command::Compare(a) => {
            let reports = a.reports.iter().map(|p| MetricReport::load(p)).collect::<Result<Vec<_>>>()?;
            let out = compare(&reports, &a.out)?;
            log::info!("wrote {} and {} plots", out.table.display(), out.plots.len());
        }
        Command::Reproduce(a) => {
            let recipe = load_recipe(&a.recipe)?;
            let root = recipe.output_root(a.out.as_deref());
            reproduce(&recipe, &root)?;
        }
    }
    Ok(())
}

/// One-line JSON error report for standard error.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
