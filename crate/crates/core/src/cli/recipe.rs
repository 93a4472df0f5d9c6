use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{resolve_config, Dims, ModelConfig, ModelKind};
use crate::pushsim::DatasetSpec;
use crate::train::TrainConfig;

fn two() -> usize {
    2
}

fn five() -> usize {
    5
}

fn fifteen() -> usize {
    15
}

fn one() -> usize {
    1
}

fn sixteen() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeEval {
    /// Extended evaluation horizon.
    #[serde(default = "fifteen")]
    pub horizon: usize,
    /// Step scored by the edge-case analysis.
    #[serde(default = "five")]
    pub edge_step: usize,
    #[serde(default = "one")]
    pub window_stride: usize,
    #[serde(default = "sixteen")]
    pub batch_size: usize,
    #[serde(default)]
    pub noise_seed: u64,
}

impl Default for RecipeEval {
    fn default() -> Self {
        Self {
            horizon: 15,
            edge_step: 5,
            window_stride: 1,
            batch_size: 16,
            noise_seed: 0,
        }
    }
}

/// A full experiment: dataset, models, seeds, training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecipe {
    pub name: String,
    /// Where outputs go; relative paths resolve against the working
    /// directory.
    #[serde(default)]
    pub output_root: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub dims: Dims,
    #[serde(default = "two")]
    pub context: usize,
    /// Predicted frames per training window.
    #[serde(default = "five")]
    pub train_horizon: usize,
    /// `train.seed` must stay 0; runs take their seed from `seeds`.
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: RecipeEval,
}

impl RunRecipe {
    /// Resolved model configuration for `kind`.
    pub fn model_config(&self, kind: ModelKind) -> Result<ModelConfig> {
        let config = ModelConfig {
            kind,
            dims: self.dims.clone(),
            context: self.context,
            horizon: self.train_horizon,
            beta: self.train.beta,
            tactile_loss_weight: self.train.tactile_loss_weight,
        };
        resolve_config(&config)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("recipe needs at least one model and one seed".into()));
        }
        let kinds: BTreeSet<_> = self.models.iter().map(|k| k.name()).collect();
        if kinds.len() != self.models.len() {
            return Err(Error::Config("recipe lists a model kind twice".into()));
        }
        let seeds: BTreeSet<_> = self.seeds.iter().collect();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("recipe lists a seed twice".into()));
        }
        if self.train.seed != 0 {
            return Err(Error::Config("train.seed is set per run from `seeds`; leave it at 0".into()));
        }
        if self.eval.horizon == 0 || self.eval.edge_step == 0 || self.eval.window_stride == 0 || self.eval.batch_size == 0 {
            return Err(Error::Config("eval horizon, edge_step, window_stride and batch_size must be positive".into()));
        }
        self.dataset.validate()?;
        self.train.validate()?;
        for &kind in &self.models {
            self.model_config(kind)?.validate()?;
        }
        Ok(())
    }

    pub fn output_root(&self, override_root: Option<&Path>) -> PathBuf {
        override_root
            .map(Path::to_path_buf)
            .or_else(|| self.output_root.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }
}

/// Parses and validates a recipe file. Unknown keys and undefined model
/// kinds are schema errors that name the offending entry.
pub fn load_recipe(path: &Path) -> Result<RunRecipe> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_recipe(&text, &path.display().to_string())
}

pub fn parse_recipe(text: &str, origin: &str) -> Result<RunRecipe> {
    let recipe: RunRecipe = serde_json::from_str(text).map_err(|e| Error::schema(origin, "recipe", e.to_string()))?;
    recipe.validate()?;
    Ok(recipe)
}
