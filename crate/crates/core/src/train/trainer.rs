use std::path::{Path, PathBuf};

use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curves::{write_curves, EpochRecord};
use super::loss::{compute_loss, LossBreakdown};
use crate::episode::{compute_tactile_stats, load_split, make_windows, normalize_episode, Episode, NormStats, SequenceSample};
use crate::error::{Error, Result};
use crate::models::{save_checkpoint, Batch, CheckpointInfo, Model, NoiseStream, RolloutMode};
use crate::seed::mix_seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherForcing {
    /// Ground-truth frames and posterior latents at every step.
    #[default]
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub tactile_loss_weight: f64,
    pub seed: u64,
    #[serde(default)]
    pub teacher_forcing: TeacherForcing,
    /// Frame offset between consecutive training windows.
    #[serde(default = "default_stride")]
    pub window_stride: usize,
    /// Fraction of training episodes held out for validation.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Stop after this many epochs without a validation improvement.
    #[serde(default)]
    pub patience: Option<usize>,
}

fn default_stride() -> usize {
    1
}

fn default_val_fraction() -> f64 {
    0.1
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 2e-3,
            beta: 1e-4,
            tactile_loss_weight: 1.0,
            seed: 0,
            teacher_forcing: TeacherForcing::Full,
            window_stride: default_stride(),
            val_fraction: default_val_fraction(),
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta >= 0.0
            && self.tactile_loss_weight >= 0.0
            && self.window_stride > 0
            && (0.0..1.0).contains(&self.val_fraction)
            && self.patience != Some(0);
        if !ok {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// Normalized training and validation windows. Validation windows come from
/// whole held-out episodes, so the two sets never share a trial.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub norm: NormStats,
}

impl TrainData {
    pub fn from_episodes(
        episodes: &[Episode],
        context: usize,
        last: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        let mut order: Vec<usize> = (0..episodes.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x7a1)));
        let n_val = if episodes.len() > 1 {
            ((episodes.len() as f64 * config.val_fraction).round() as usize).min(episodes.len() - 1)
        } else {
            0
        };
        let (val_idx, train_idx) = order.split_at(n_val);
        let norm = compute_tactile_stats(train_idx.iter().map(|&i| &episodes[i]))?;
        let windows = |idx: &[usize]| -> Vec<SequenceSample> {
            let mut idx = idx.to_vec();
            idx.sort_unstable();
            idx.iter()
                .flat_map(|&i| make_windows(&normalize_episode(&episodes[i], &norm), context, last, config.window_stride))
                .collect()
        };
        let data = Self {
            train: windows(train_idx),
            val: windows(val_idx),
            norm,
        };
        if data.train.is_empty() {
            return Err(Error::Config(format!(
                "no training windows: episodes are shorter than {} frames",
                last + 1
            )));
        }
        Ok(data)
    }

    pub fn from_split(root: &Path, context: usize, last: usize, config: &TrainConfig) -> Result<Self> {
        let (_, episodes) = load_split(root, "train")?;
        Self::from_episodes(&episodes, context, last, config)
    }
}

/// Owns the model and its optimizer; applies one update per call.
pub struct Trainer {
    model: Model,
    optimizer: AdamW,
    config: TrainConfig,
    step: u64,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mc = model.config();
        if mc.beta != config.beta || mc.tactile_loss_weight != config.tactile_loss_weight {
            return Err(Error::Config(format!(
                "model config (beta {}, tactile weight {}) disagrees with training config (beta {}, tactile weight {})",
                mc.beta, mc.tactile_loss_weight, config.beta, config.tactile_loss_weight
            )));
        }
        let params = ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: 0.0,
            ..ParamsAdamW::default()
        };
        let optimizer = AdamW::new(model.store().vars(), params)?;
        Ok(Self {
            model,
            optimizer,
            config,
            step: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One optimizer update on `batch`.
    pub fn training_step(&mut self, batch: &Batch) -> Result<LossBreakdown> {
        let mut noise = NoiseStream::seeded(mix_seed(self.config.seed, 0x1000_0000 + self.step));
        let (tensors, breakdown) = compute_loss(
            &self.model,
            batch,
            RolloutMode::TrainPosterior,
            &mut noise,
            self.config.beta,
            self.config.tactile_loss_weight,
        )?;
        if let Some(component) = breakdown.non_finite_component() {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                component: component.to_string(),
            });
        }
        self.optimizer.backward_step(&tensors.total)?;
        self.step += 1;
        Ok(breakdown)
    }

    /// Loss without an update: posterior latents, running batch-norm
    /// statistics, fixed noise.
    pub fn evaluate_loss(&self, batch: &Batch, noise_seed: u64) -> Result<LossBreakdown> {
        let mut noise = NoiseStream::seeded(noise_seed);
        let (_, breakdown) = compute_loss(
            &self.model,
            batch,
            RolloutMode::EvalPosterior,
            &mut noise,
            self.config.beta,
            self.config.tactile_loss_weight,
        )?;
        Ok(breakdown)
    }
}

fn mean_breakdown(items: &[LossBreakdown], beta: f64, w: f64) -> LossBreakdown {
    let n = items.len().max(1) as f64;
    let s = items.iter().map(|b| b.scene_recon).sum::<f64>() / n;
    let t = items.iter().map(|b| b.tactile_recon).sum::<f64>() / n;
    let k = items.iter().map(|b| b.kl).sum::<f64>() / n;
    LossBreakdown::compose(s, t, k, beta, w)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Trains for `config.epochs`, keeping the checkpoint with the best
/// validation loss at `out` (the final epoch's weights when there is no
/// validation set). Curves go to `out` with a `.curves.csv` suffix.
pub fn train(model: Model, data: &TrainData, config: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model, config.clone())?;
    let seed = trainer.model.seed();
    let info = |trainer: &Trainer, epoch: usize, val: Option<f64>| CheckpointInfo {
        config: trainer.model.config().clone(),
        seed,
        step: trainer.step,
        epoch,
        norm: Some(data.norm.clone()),
        val_total: val,
    };
    let curves_path = curves_path(out);
    if config.epochs == 0 {
        save_checkpoint(&trainer.model, &info(&trainer, 0, None), out)?;
        write_curves(&curves_path, &[])?;
        return Ok(TrainOutcome {
            checkpoint: out.to_path_buf(),
            curves: Vec::new(),
            best_epoch: None,
        });
    }

    let device = trainer.model.device().clone();
    let dtype = trainer.model.dtype();
    let val_batches = data
        .val
        .chunks(config.batch_size)
        .map(|c| Batch::from_samples(c, dtype, &device))
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64)> = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, epoch as u64)));
        let mut losses = Vec::with_capacity(order.len() / config.batch_size + 1);
        for chunk in order.chunks(config.batch_size) {
            let samples: Vec<SequenceSample> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let batch = Batch::from_samples(&samples, dtype, &device)?;
            losses.push(trainer.training_step(&batch)?);
        }
        let train_loss = mean_breakdown(&losses, config.beta, config.tactile_loss_weight);
        let val_total = if val_batches.is_empty() {
            None
        } else {
            let v = val_batches
                .iter()
                .enumerate()
                .map(|(i, b)| trainer.evaluate_loss(b, mix_seed(config.seed, 0x2000_0000 + i as u64)))
                .collect::<Result<Vec<_>>>()?;
            Some(mean_breakdown(&v, config.beta, config.tactile_loss_weight).total)
        };
        log::info!(
            "{} epoch {epoch}: total {:.5} (scene {:.5}, tactile {:.5}, kl {:.3}) val {:?}",
            trainer.model.kind(),
            train_loss.total,
            train_loss.scene_recon,
            train_loss.tactile_recon,
            train_loss.kl,
            val_total
        );
        curves.push(EpochRecord {
            epoch,
            loss: train_loss,
            val_total,
        });

        let improved = match (val_total, best) {
            (None, _) => true,
            (Some(v), None) => v.is_finite(),
            (Some(v), Some((_, b))) => v < b,
        };
        if improved {
            best = Some((epoch, val_total.unwrap_or(train_loss.total)));
            save_checkpoint(&trainer.model, &info(&trainer, epoch + 1, val_total), out)?;
        } else if let (Some(p), Some((be, _))) = (config.patience, best) {
            if epoch - be >= p {
                log::info!("validation has not improved for {p} epochs; stopping");
                break;
            }
        }
    }
    write_curves(&curves_path, &curves)?;
    Ok(TrainOutcome {
        checkpoint: out.to_path_buf(),
        curves,
        best_epoch: best.map(|(e, _)| e),
    })
}

pub fn curves_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".curves.csv");
    checkpoint.with_file_name(name)
}
