use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::episode::SCENE_SIZE;
use crate::error::{Error, Result};
use crate::models::{taxels_to_image, Batch, Model, ModelKind, NoiseStream, Prediction, RolloutMode};
use crate::nets::kl_divergence;

/// Loss components of one batch, averaged over the batch and summed over
/// the predicted frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub scene_recon: f64,
    pub tactile_recon: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn compose(scene_recon: f64, tactile_recon: f64, kl: f64, beta: f64, tactile_weight: f64) -> Self {
        Self {
            scene_recon,
            tactile_recon,
            kl,
            total: scene_recon + tactile_weight * tactile_recon + beta * kl,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.scene_recon.is_finite() && self.tactile_recon.is_finite() && self.kl.is_finite() && self.total.is_finite()
    }

    /// First non-finite component, for diagnostics.
    pub fn non_finite_component(&self) -> Option<&'static str> {
        [
            ("scene_recon", self.scene_recon),
            ("tactile_recon", self.tactile_recon),
            ("kl", self.kl),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// Loss tensors from one rollout.
pub struct LossTensors {
    pub scene: Tensor,
    pub tactile: Option<Tensor>,
    pub kl: Option<Tensor>,
    pub total: Tensor,
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Squared error per predicted frame (mean over pixels or taxels), summed
/// over frames; KL summed over frames and latent dimensions, averaged over
/// the batch.
pub fn loss_tensors(model: &Model, batch: &Batch, pred: &Prediction, beta: f64, tactile_weight: f64) -> Result<LossTensors> {
    let c = batch.context;
    let mut scene = Vec::with_capacity(pred.scene.len());
    for (k, x) in pred.scene.iter().enumerate() {
        scene.push((x - &batch.scene[c + k])?.sqr()?.mean_all()?);
    }
    let scene = Tensor::stack(&scene, 0)?.sum_all()?;

    let tactile = if model.kind() == ModelKind::Svtg {
        let imgs = pred.tactile_image.as_ref().expect("SVTG decodes a tactile image");
        let mut terms = Vec::with_capacity(imgs.len());
        for (k, img) in imgs.iter().enumerate() {
            let target = taxels_to_image(&batch.tactile[c + k], SCENE_SIZE)?;
            terms.push((img - target)?.sqr()?.mean_all()?);
        }
        Some(Tensor::stack(&terms, 0)?.sum_all()?)
    } else if let Some(d) = &pred.tactile {
        let mut terms = Vec::with_capacity(d.len());
        for (k, dh) in d.iter().enumerate() {
            terms.push((dh - &batch.tactile[c + k])?.sqr()?.mean_all()?);
        }
        Some(Tensor::stack(&terms, 0)?.sum_all()?)
    } else {
        None
    };

    let kl = if pred.latents.iter().all(|l| l.posterior.is_some()) && !pred.latents.is_empty() {
        let mut terms = Vec::with_capacity(pred.latents.len());
        for l in &pred.latents {
            let q = l.posterior.as_ref().expect("checked");
            terms.push(kl_divergence(q, &l.prior)?.mean_all()?);
        }
        Some(Tensor::stack(&terms, 0)?.sum_all()?)
    } else {
        None
    };

    let mut total = scene.clone();
    if let Some(t) = &tactile {
        total = (total + (t * tactile_weight)?)?;
    }
    if let Some(k) = &kl {
        total = (total + (k * beta)?)?;
    }
    Ok(LossTensors {
        scene,
        tactile,
        kl,
        total,
    })
}

impl LossTensors {
    pub fn breakdown(&self, beta: f64, tactile_weight: f64) -> Result<LossBreakdown> {
        let s = scalar(&self.scene)?;
        let t = self.tactile.as_ref().map(scalar).transpose()?.unwrap_or(0.0);
        let k = self.kl.as_ref().map(scalar).transpose()?.unwrap_or(0.0);
        Ok(LossBreakdown::compose(s, t, k, beta, tactile_weight))
    }
}

/// Rolls out `batch` in `mode` and returns the loss tensors together with
/// their host-side breakdown.
pub fn compute_loss(
    model: &Model,
    batch: &Batch,
    mode: RolloutMode,
    noise: &mut NoiseStream,
    beta: f64,
    tactile_weight: f64,
) -> Result<(LossTensors, LossBreakdown)> {
    if mode == RolloutMode::TestPrior {
        return Err(Error::Contract("training losses need posterior latents".into()));
    }
    let pred = model.rollout(batch, mode, noise)?;
    let tensors = loss_tensors(model, batch, &pred, beta, tactile_weight)?;
    let breakdown = tensors.breakdown(beta, tactile_weight)?;
    Ok((tensors, breakdown))
}
