use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{MetricReport, ReportMeta, SeedAccumulator, SeedScores};
use crate::episode::{
    load_split, make_windows, normalize_episode, normalize_tactile, Episode, NormStats, SceneFrame, SequenceSample,
    TactileFrame,
};
use crate::error::{Error, Result};
use crate::models::{
    anaesthetise, load_checkpoint, tensor_to_frames, tensor_to_tactile, Batch, CheckpointInfo, Model, ModelKind,
    NoiseStream, RolloutMode,
};
use crate::seed::mix_seed;

/// A checkpoint ready for evaluation.
pub struct LoadedModel {
    pub model: Model,
    pub info: CheckpointInfo,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let (model, info) = load_checkpoint(path)?;
        Ok(Self { model, info })
    }

    pub fn norm(&self) -> NormStats {
        self.info.norm.clone().unwrap_or_else(NormStats::identity)
    }
}

pub fn load_models(paths: &[PathBuf]) -> Result<Vec<LoadedModel>> {
    paths.iter().map(|p| LoadedModel::load(p)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub horizon: usize,
    #[serde(default)]
    pub anaesthetise: bool,
    #[serde(default = "one")]
    pub window_stride: usize,
    #[serde(default = "sixteen")]
    pub batch_size: usize,
    #[serde(default)]
    pub noise_seed: u64,
    /// Report label; defaults to the model kind.
    #[serde(default)]
    pub label: Option<String>,
}

fn one() -> usize {
    1
}

fn sixteen() -> usize {
    16
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            horizon: 15,
            anaesthetise: false,
            window_stride: 1,
            batch_size: 16,
            noise_seed: 0,
            label: None,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.window_stride == 0 || self.batch_size == 0 {
            return Err(Error::Config("horizon, window_stride and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Model predictions for one window, frames `context..=last`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPrediction {
    pub scene: Vec<SceneFrame>,
    pub tactile: Option<Vec<TactileFrame>>,
}

/// Shared kind and context across checkpoints.
pub fn common_kind(models: &[LoadedModel]) -> Result<(ModelKind, usize)> {
    let first = models
        .first()
        .ok_or_else(|| Error::Config("no checkpoints given".into()))?;
    let (kind, context) = (first.model.kind(), first.model.config().context);
    let odd: Vec<String> = models
        .iter()
        .filter(|m| m.model.kind() != kind || m.model.config().context != context)
        .map(|m| format!("{} (seed {})", m.model.kind(), m.info.seed))
        .collect();
    if !odd.is_empty() {
        return Err(Error::Config(format!(
            "checkpoints must share kind {kind} and context {context}; offenders: {}",
            odd.join(", ")
        )));
    }
    Ok((kind, context))
}

/// Normalized evaluation windows for one checkpoint. With `anaesthetise`
/// every tactile frame becomes the normalized `rest` frame.
pub fn eval_windows(
    episodes: &[Episode],
    loaded: &LoadedModel,
    rest: &TactileFrame,
    opts: &EvalOptions,
) -> Result<Vec<SequenceSample>> {
    let context = loaded.model.config().context;
    let last = context + opts.horizon - 1;
    let norm = loaded.norm();
    let baseline = normalize_tactile(rest, &norm);
    let mut out = Vec::new();
    for (i, ep) in episodes.iter().enumerate() {
        if ep.len() <= last {
            return Err(Error::Contract(format!(
                "episode {i} has {} frames; horizon {} with context {context} needs {}",
                ep.len(),
                opts.horizon,
                last + 1
            )));
        }
        let ep = normalize_episode(ep, &norm);
        for w in make_windows(&ep, context, last, opts.window_stride) {
            out.push(if opts.anaesthetise { anaesthetise(&w, &baseline) } else { w });
        }
    }
    Ok(out)
}

/// Test-mode rollouts of `windows` in fixed batches. Batch `i` draws its
/// latents from `mix_seed(noise_seed, i)`.
pub fn predict_windows(
    model: &Model,
    windows: &[SequenceSample],
    batch_size: usize,
    noise_seed: u64,
) -> Result<Vec<WindowPrediction>> {
    let mut out = Vec::with_capacity(windows.len());
    for (i, chunk) in windows.chunks(batch_size.max(1)).enumerate() {
        let batch = Batch::from_samples(chunk, model.dtype(), model.device())?;
        let mut noise = NoiseStream::seeded(mix_seed(noise_seed, i as u64));
        let pred = model.rollout(&batch, RolloutMode::TestPrior, &mut noise)?;
        let scene: Vec<Vec<SceneFrame>> = pred.scene.iter().map(tensor_to_frames).collect::<Result<_>>()?;
        let tactile: Option<Vec<Vec<TactileFrame>>> = pred
            .tactile
            .as_ref()
            .map(|ts| ts.iter().map(tensor_to_tactile).collect::<Result<_>>())
            .transpose()?;
        for n in 0..chunk.len() {
            out.push(WindowPrediction {
                scene: scene.iter().map(|s| s[n].clone()).collect(),
                tactile: tactile.as_ref().map(|ts| ts.iter().map(|t| t[n]).collect()),
            });
        }
    }
    Ok(out)
}

fn score_model(loaded: &LoadedModel, episodes: &[Episode], rest: &TactileFrame, opts: &EvalOptions) -> Result<SeedScores> {
    let windows = eval_windows(episodes, loaded, rest, opts)?;
    let preds = predict_windows(&loaded.model, &windows, opts.batch_size, opts.noise_seed)?;
    let tactile = loaded.model.kind().predicts_tactile();
    let mut acc = SeedAccumulator::new(opts.horizon, tactile);
    for (w, p) in windows.iter().zip(&preds) {
        let t = match &p.tactile {
            Some(tp) if tactile => Some((tp.as_slice(), w.target_tactile.as_slice())),
            _ => None,
        };
        acc.add_window(&p.scene, &w.target_scene, t)?;
    }
    acc.finish(loaded.info.seed)
}

/// Scores every checkpoint (one per training seed) on `episodes` and
/// summarizes across seeds. `rest` is the raw no-contact sensor frame.
pub fn evaluate_models(
    models: &[LoadedModel],
    episodes: &[Episode],
    rest: &TactileFrame,
    split: &str,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    opts.validate()?;
    let (kind, context) = common_kind(models)?;
    let per_seed = models
        .iter()
        .map(|m| score_model(m, episodes, rest, opts))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_seeds(
        ReportMeta {
            model: opts.label.clone().unwrap_or_else(|| kind.name().to_string()),
            kind,
            split: split.to_string(),
            context,
            horizon: opts.horizon,
            anaesthetised: opts.anaesthetise,
        },
        per_seed,
    )
}

/// Loads checkpoints and the dataset split, then [`evaluate_models`].
pub fn evaluate(checkpoints: &[PathBuf], root: &Path, split: &str, opts: &EvalOptions) -> Result<MetricReport> {
    let models = load_models(checkpoints)?;
    let (manifest, episodes) = load_split(root, split)?;
    evaluate_models(&models, &episodes, &manifest.rest_frame(), split, opts)
}
