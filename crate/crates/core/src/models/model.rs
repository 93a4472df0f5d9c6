use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, D};

use super::batch::{image_to_taxels, taxels_to_image, Batch, NoiseStream, ACTION_DIM};
use super::config::{ModelConfig, ModelKind};
use crate::episode::SCENE_SIZE;
use crate::error::{Error, Result};
use crate::nets::{
    sample_latent, Actp, GaussianLstm, GaussianParams, Mmfm, ParamStore, Predictor, SceneDecoder, SceneEncoder,
    TactileEncoder,
};

/// Parameter-group prefixes, in the order they are reported.
pub const PARAM_GROUPS: [&str; 9] = [
    "encoder",
    "decoder",
    "tactile_encoder",
    "prior",
    "posterior",
    "predictor",
    "mmfm_scene",
    "mmfm_tactile",
    "actp",
];

/// Largest relative parameter-count gap tolerated for SPOTS_SMALL vs SVG.
pub const PARITY_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutMode {
    /// Posterior latents, ground-truth inputs, batch-norm batch statistics.
    TrainPosterior,
    /// As `TrainPosterior` but batch norm uses running statistics; for
    /// validation losses.
    EvalPosterior,
    /// Prior latents; after the context the model consumes its own
    /// predictions.
    TestPrior,
}

#[derive(Clone, Debug)]
pub struct LatentStep {
    pub prior: GaussianParams,
    /// Absent in test mode.
    pub posterior: Option<GaussianParams>,
}

/// Predicted frames `context..=last`.
#[derive(Clone, Debug)]
pub struct Prediction {
    /// `(batch, 3, H, W)` per predicted frame.
    pub scene: Vec<Tensor>,
    /// `(batch, 48)` per predicted frame, for tactile-predicting kinds.
    pub tactile: Option<Vec<Tensor>>,
    /// SVTG's decoded tactile image `(batch, 3, H, W)`.
    pub tactile_image: Option<Vec<Tensor>>,
    pub latents: Vec<LatentStep>,
}

pub struct Model {
    config: ModelConfig,
    seed: u64,
    store: ParamStore,
    encoder: SceneEncoder,
    decoder: SceneDecoder,
    tactile_encoder: Option<TactileEncoder>,
    prior: GaussianLstm,
    posterior: GaussianLstm,
    predictor: Predictor,
    mmfm_scene: Option<Mmfm>,
    mmfm_tactile: Option<Mmfm>,
    actp: Option<Actp>,
}

/// Builds a seeded `f32` model on the CPU.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    Model::build(config, seed, DType::F32, &Device::Cpu)
}

/// Exact trainable-parameter count of `config` without drawing weights.
/// SPOTS_SMALL's scene hidden size is resolved first if unset.
pub fn count_config_parameters(config: &ModelConfig) -> Result<usize> {
    let config = resolve_config(config)?;
    let store = ParamStore::shape_only();
    Model::assemble(&config, 0, store.clone())?;
    Ok(store.count())
}

fn raw_count(config: &ModelConfig) -> Result<usize> {
    let store = ParamStore::shape_only();
    Model::assemble(config, 0, store.clone())?;
    Ok(store.count())
}

/// Fills in SPOTS_SMALL's scene hidden size so that its parameter count is
/// as close as possible to SVG's under the same dims.
pub fn resolve_config(config: &ModelConfig) -> Result<ModelConfig> {
    config.validate()?;
    if config.kind != ModelKind::SpotsSmall || config.dims.scene_hidden.is_some() {
        return Ok(config.clone());
    }
    let mut svg = config.clone();
    svg.kind = ModelKind::Svg;
    let target = raw_count(&svg)?;
    let with = |h: usize| {
        let mut c = config.clone();
        c.dims.scene_hidden = Some(h);
        c
    };
    // smallest h whose count reaches the target
    let (mut lo, mut hi) = (1usize, config.dims.hidden);
    if raw_count(&with(hi))? < target {
        lo = hi;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if raw_count(&with(mid))? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best = (lo, raw_count(&with(lo))?);
    if lo > 1 {
        let below = raw_count(&with(lo - 1))?;
        if below.abs_diff(target) < best.1.abs_diff(target) {
            best = (lo - 1, below);
        }
    }
    let gap = best.1.abs_diff(target) as f64 / target as f64;
    if gap > PARITY_TOLERANCE {
        return Err(Error::Parity {
            achieved: best.1,
            target,
        });
    }
    Ok(with(best.0))
}

impl Model {
    pub fn build(config: &ModelConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        let config = resolve_config(config)?;
        Self::assemble(&config, seed, ParamStore::new(dtype, device.clone()))
    }

    fn assemble(config: &ModelConfig, seed: u64, store: ParamStore) -> Result<Self> {
        let d = &config.dims;
        let kind = config.kind;
        let root = store.builder(seed);
        let channels = if kind == ModelKind::Svtg { 6 } else { 3 };
        let separate_tactile = kind.uses_tactile() && kind != ModelKind::Svtg;
        let latent_in = d.g_dim + if kind.tactile_in_prior() && kind.is_dual_pipeline() { d.m_dim } else { 0 };
        let predictor_in = d.g_dim + if kind == ModelKind::SvgTe { d.m_dim } else { 0 } + ACTION_DIM + d.z_dim;
        let sh = config.scene_hidden();
        let dual = kind.is_dual_pipeline();
        Ok(Self {
            encoder: SceneEncoder::new(&root.pp("encoder"), channels, d.nf, d.g_dim)?,
            decoder: SceneDecoder::new(&root.pp("decoder"), channels, d.nf, d.g_dim)?,
            tactile_encoder: separate_tactile
                .then(|| TactileEncoder::new(&root.pp("tactile_encoder"), d.m_dim))
                .transpose()?,
            prior: GaussianLstm::new(&root.pp("prior"), latent_in, sh, d.z_dim)?,
            posterior: GaussianLstm::new(&root.pp("posterior"), latent_in, sh, d.z_dim)?,
            predictor: Predictor::new(&root.pp("predictor"), predictor_in, sh, d.g_dim)?,
            mmfm_scene: dual
                .then(|| Mmfm::new(&root.pp("mmfm_scene"), d.g_dim, d.m_dim, d.g_dim))
                .transpose()?,
            mmfm_tactile: dual
                .then(|| Mmfm::new(&root.pp("mmfm_tactile"), d.m_dim, d.g_dim, d.m_dim))
                .transpose()?,
            actp: dual
                .then(|| Actp::new(&root.pp("actp"), d.m_dim, ACTION_DIM, d.g_dim, d.actp_hidden))
                .transpose()?,
            config: config.clone(),
            seed,
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    pub fn count_parameters(&self) -> usize {
        self.store.count()
    }

    /// Parameter count per group; groups absent from this kind are omitted.
    pub fn group_counts(&self) -> BTreeMap<&'static str, usize> {
        PARAM_GROUPS
            .iter()
            .map(|&g| (g, self.store.count_prefix(g)))
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    pub fn has_tactile_output(&self) -> bool {
        self.kind().predicts_tactile()
    }

    pub fn decoder_channels(&self) -> usize {
        if self.kind() == ModelKind::Svtg {
            6
        } else {
            3
        }
    }

    fn encoder_input(&self, batch: &Batch, t: usize) -> Result<Tensor> {
        if self.kind() == ModelKind::Svtg {
            let img = taxels_to_image(&batch.tactile[t], SCENE_SIZE)?;
            Ok(Tensor::cat(&[&batch.scene[t], &img], 1)?)
        } else {
            Ok(batch.scene[t].clone())
        }
    }

    fn latent_feature(&self, h: &Tensor, hd: Option<&Tensor>) -> Result<Tensor> {
        match hd {
            Some(hd) if self.kind().tactile_in_prior() && self.kind().is_dual_pipeline() => {
                Ok(Tensor::cat(&[h, hd], D::Minus1)?)
            }
            _ => Ok(h.clone()),
        }
    }

    /// Runs the model over `batch`, predicting frames `context..=last`.
    ///
    /// Context steps `t < context` use the posterior mean and draw no noise;
    /// every predicted frame draws one latent sample from `noise`.
    pub fn rollout(&self, batch: &Batch, mode: RolloutMode, noise: &mut NoiseStream) -> Result<Prediction> {
        let c = self.config.context;
        if batch.context != c {
            return Err(Error::Contract(format!(
                "model expects context {c}, batch has {}",
                batch.context
            )));
        }
        let last = batch.last;
        if last < c {
            return Err(Error::Contract("batch has no frames to predict".into()));
        }
        let b = batch.size()?;
        let kind = self.kind();
        let teacher = mode != RolloutMode::TestPrior;
        let bn_train = mode == RolloutMode::TrainPosterior;
        let z_dim = self.config.dims.z_dim;

        // ground-truth encodings: every frame with teacher forcing, context only otherwise
        let n_gt = if teacher { last + 1 } else { c };
        let inputs = (0..n_gt)
            .map(|t| self.encoder_input(batch, t))
            .collect::<Result<Vec<_>>>()?;
        let (h_all, skips_all) = self.encoder.forward(&Tensor::cat(&inputs, 0)?)?;
        let h_gt = (0..n_gt).map(|t| h_all.narrow(0, t * b, b)).collect::<candle_core::Result<Vec<_>>>()?;
        let skips = skips_all
            .iter()
            .map(|s| s.narrow(0, (c - 1) * b, b))
            .collect::<candle_core::Result<Vec<_>>>()?;
        let hd_gt = match &self.tactile_encoder {
            Some(te) => {
                let d = te.forward(&Tensor::cat(&batch.tactile[..n_gt], 0)?)?;
                Some((0..n_gt).map(|t| d.narrow(0, t * b, b)).collect::<candle_core::Result<Vec<_>>>()?)
            }
            None => None,
        };

        let like = &h_gt[0];
        let mut prior_state = self.prior.zero_state(b, like)?;
        let mut post_state = self.posterior.zero_state(b, like)?;
        let mut pred_state = self.predictor.zero_state(b, like)?;
        let mut actp_state = self.actp.as_ref().map(|a| a.zero_state(b, like)).transpose()?;

        let horizon = last + 1 - c;
        let mut out = Prediction {
            scene: Vec::with_capacity(horizon),
            tactile: kind.predicts_tactile().then(|| Vec::with_capacity(horizon)),
            tactile_image: (kind == ModelKind::Svtg).then(|| Vec::with_capacity(horizon)),
            latents: Vec::with_capacity(horizon),
        };
        // encodings of the model's own previous prediction (test mode)
        let mut h_fed: Option<Tensor> = None;
        let mut hd_fed: Option<Tensor> = None;

        for t in 1..=last {
            let use_gt = teacher || t - 1 < c;
            let h_prev = if use_gt {
                h_gt[t - 1].clone()
            } else {
                h_fed.clone().expect("prediction fed back")
            };
            let hd_prev = match (&hd_gt, kind) {
                (Some(gt), ModelKind::SvgTe) => Some(gt[(t - 1).min(c - 1)].clone()),
                (Some(gt), _) if use_gt => Some(gt[t - 1].clone()),
                (Some(_), _) => hd_fed.clone(),
                (None, _) => None,
            };

            let (prior, next) = self.prior.step(&prior_state, &self.latent_feature(&h_prev, hd_prev.as_ref())?)?;
            prior_state = next;
            let posterior = if teacher || t < c {
                let hd_t = hd_gt.as_ref().map(|v| &v[t]);
                let (q, next) = self.posterior.step(&post_state, &self.latent_feature(&h_gt[t], hd_t)?)?;
                post_state = next;
                Some(q)
            } else {
                None
            };
            let z = if t < c {
                posterior.as_ref().expect("context posterior").mu.clone()
            } else {
                let eps = noise.draw(b, z_dim, self.dtype(), self.device())?;
                let source = if teacher { posterior.as_ref().expect("posterior") } else { &prior };
                sample_latent(source, &eps)?
            };

            let action = &batch.actions[t];
            let feat = match (&self.mmfm_scene, kind) {
                (Some(m), _) => m.forward(&h_prev, hd_prev.as_ref().expect("tactile feature"), bn_train)?,
                (None, ModelKind::SvgTe) => Tensor::cat(&[&h_prev, hd_prev.as_ref().expect("tactile feature")], D::Minus1)?,
                _ => h_prev.clone(),
            };
            let (g_t, next) = self.predictor.step(&pred_state, &feat, action, &z)?;
            pred_state = next;

            let mut d_hat = None;
            if let (Some(actp), Some(mt)) = (&self.actp, &self.mmfm_tactile) {
                let hd = hd_prev.as_ref().expect("tactile feature");
                let tf = mt.forward(hd, &h_prev, bn_train)?;
                let (d, next) = actp.step(actp_state.as_ref().expect("actp state"), &tf, action, &g_t)?;
                actp_state = Some(next);
                d_hat = Some(d);
            }

            if t < c {
                continue;
            }
            let decoded = self.decoder.forward(&g_t, &skips)?;
            let scene = if kind == ModelKind::Svtg {
                let timg = decoded.narrow(1, 3, 3)?;
                d_hat = Some(image_to_taxels(&timg)?);
                out.tactile_image.as_mut().expect("svtg").push(timg);
                decoded.narrow(1, 0, 3)?
            } else {
                decoded.clone()
            };
            if !teacher && t < last {
                let input = if kind == ModelKind::Svtg { &decoded } else { &scene };
                h_fed = Some(self.encoder.forward(input)?.0);
                if let (Some(te), Some(d)) = (&self.tactile_encoder, &d_hat) {
                    hd_fed = Some(te.forward(d)?);
                }
            }
            out.scene.push(scene);
            if let (Some(v), Some(d)) = (out.tactile.as_mut(), d_hat) {
                v.push(d);
            }
            out.latents.push(LatentStep { prior, posterior });
        }
        Ok(out)
    }
}
