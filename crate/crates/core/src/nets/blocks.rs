use candle_core::{Tensor, D};

use super::gaussian::GaussianParams;
use super::layers::{leaky_relu, BatchNorm1d, Conv2d, ConvTranspose2d, Linear, Lstm, RecurrentState};
use super::params::Builder;
use crate::episode::{SCENE_SIZE, TACTILE_DIM};
use crate::error::{Error, Result};

/// Encoder activations reused by the decoder, finest first.
pub type SkipActivations = Vec<Tensor>;

/// Strided convolutional pyramid 64 → 32 → 16 → 8 → 4 → 1.
#[derive(Clone, Debug)]
pub struct SceneEncoder {
    stages: Vec<Conv2d>,
    head: Conv2d,
    channels: usize,
}

impl SceneEncoder {
    pub fn new(b: &Builder, channels: usize, nf: usize, g_dim: usize) -> Result<Self> {
        let widths = [channels, nf, 2 * nf, 4 * nf, 8 * nf];
        let stages = (0..4)
            .map(|i| Conv2d::new(&b.pp(&format!("c{i}")), widths[i], widths[i + 1], 4, 2, 1))
            .collect::<Result<_>>()?;
        Ok(Self {
            stages,
            head: Conv2d::new(&b.pp("head"), 8 * nf, g_dim, 4, 1, 0)?,
            channels,
        })
    }

    /// `x` is `(batch, channels, 64, 64)`; returns `(batch, g_dim)` in (−1, 1).
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, SkipActivations)> {
        let (_, c, h, w) = x.dims4()?;
        if c != self.channels || h != SCENE_SIZE || w != SCENE_SIZE {
            return Err(Error::Config(format!(
                "scene encoder expects {}×{SCENE_SIZE}×{SCENE_SIZE}, got {c}×{h}×{w}",
                self.channels
            )));
        }
        let mut skips = Vec::with_capacity(4);
        let mut y = x.clone();
        for stage in &self.stages {
            y = leaky_relu(&stage.forward(&y)?)?;
            skips.push(y.clone());
        }
        let h = self.head.forward(&y)?.flatten_from(1)?.tanh()?;
        Ok((h, skips))
    }
}

/// Mirror of [`SceneEncoder`] with skip concatenation and a sigmoid output.
#[derive(Clone, Debug)]
pub struct SceneDecoder {
    head: ConvTranspose2d,
    stages: Vec<ConvTranspose2d>,
    g_dim: usize,
}

impl SceneDecoder {
    pub fn new(b: &Builder, out_channels: usize, nf: usize, g_dim: usize) -> Result<Self> {
        let widths = [8 * nf, 4 * nf, 2 * nf, nf, out_channels];
        let stages = (0..4)
            .map(|i| ConvTranspose2d::new(&b.pp(&format!("u{i}")), 2 * widths[i], widths[i + 1], 4, 2, 1))
            .collect::<Result<_>>()?;
        Ok(Self {
            head: ConvTranspose2d::new(&b.pp("head"), g_dim, 8 * nf, 4, 1, 0)?,
            stages,
            g_dim,
        })
    }

    pub fn forward(&self, h: &Tensor, skips: &[Tensor]) -> Result<Tensor> {
        let (batch, g) = h.dims2()?;
        if g != self.g_dim || skips.len() != 4 {
            return Err(Error::Config(format!(
                "scene decoder expects g_dim {} and 4 skips, got {g} and {}",
                self.g_dim,
                skips.len()
            )));
        }
        let mut y = leaky_relu(&self.head.forward(&h.reshape((batch, g, 1, 1))?)?)?;
        for (i, stage) in self.stages.iter().enumerate() {
            let skip = &skips[3 - i];
            y = stage.forward(&Tensor::cat(&[&y, skip], 1)?)?;
            if i < 3 {
                y = leaky_relu(&y)?;
            }
        }
        Ok(candle_nn::ops::sigmoid(&y)?)
    }
}

/// Flattened taxel frame `R^48` to an `m_dim` feature.
#[derive(Clone, Debug)]
pub struct TactileEncoder {
    l1: Linear,
    l2: Linear,
}

impl TactileEncoder {
    pub fn new(b: &Builder, m_dim: usize) -> Result<Self> {
        Ok(Self {
            l1: Linear::new(&b.pp("l1"), TACTILE_DIM, 2 * m_dim)?,
            l2: Linear::new(&b.pp("l2"), 2 * m_dim, m_dim)?,
        })
    }

    pub fn forward(&self, d: &Tensor) -> Result<Tensor> {
        self.l2.forward(&self.l1.forward(d)?.tanh()?)?.tanh().map_err(Into::into)
    }
}

/// Recurrent network emitting the parameters of a diagonal Gaussian; used
/// for both the learned prior and the approximate posterior.
#[derive(Clone, Debug)]
pub struct GaussianLstm {
    embed: Linear,
    lstm: Lstm,
    mu: Linear,
    log_sigma: Linear,
}

impl GaussianLstm {
    pub fn new(b: &Builder, input: usize, hidden: usize, z_dim: usize) -> Result<Self> {
        Ok(Self {
            embed: Linear::new(&b.pp("embed"), input, hidden)?,
            lstm: Lstm::new(&b.pp("lstm"), hidden, hidden, 1)?,
            mu: Linear::new(&b.pp("mu"), hidden, z_dim)?,
            log_sigma: Linear::new(&b.pp("log_sigma"), hidden, z_dim)?,
        })
    }

    pub fn zero_state(&self, batch: usize, like: &Tensor) -> Result<RecurrentState> {
        self.lstm.zero_state(batch, like)
    }

    pub fn step(&self, state: &RecurrentState, feat: &Tensor) -> Result<(GaussianParams, RecurrentState)> {
        let (h, next) = self.lstm.step(&self.embed.forward(feat)?, state)?;
        let params = GaussianParams {
            mu: self.mu.forward(&h)?,
            log_sigma: self.log_sigma.forward(&h)?,
        };
        Ok((params, next))
    }
}

/// Frame predictor: `[feature ⊕ action ⊕ z]` through a 2-layer LSTM to the
/// next frame's `g_dim` feature.
#[derive(Clone, Debug)]
pub struct Predictor {
    embed: Linear,
    lstm: Lstm,
    out: Linear,
}

impl Predictor {
    pub fn new(b: &Builder, input: usize, hidden: usize, g_dim: usize) -> Result<Self> {
        Ok(Self {
            embed: Linear::new(&b.pp("embed"), input, hidden)?,
            lstm: Lstm::new(&b.pp("lstm"), hidden, hidden, 2)?,
            out: Linear::new(&b.pp("out"), hidden, g_dim)?,
        })
    }

    pub fn zero_state(&self, batch: usize, like: &Tensor) -> Result<RecurrentState> {
        self.lstm.zero_state(batch, like)
    }

    pub fn step(
        &self,
        state: &RecurrentState,
        feat: &Tensor,
        action: &Tensor,
        z: &Tensor,
    ) -> Result<(Tensor, RecurrentState)> {
        let x = Tensor::cat(&[feat, action, z], D::Minus1)?;
        let (h, next) = self.lstm.step(&self.embed.forward(&x)?, state)?;
        Ok((self.out.forward(&h)?.tanh()?, next))
    }
}

/// Multi-modal fusion: two linear layers, each followed by batch
/// normalization and tanh.
#[derive(Clone, Debug)]
pub struct Mmfm {
    l1: Linear,
    bn1: BatchNorm1d,
    l2: Linear,
    bn2: BatchNorm1d,
}

impl Mmfm {
    pub fn new(b: &Builder, primary: usize, secondary: usize, out: usize) -> Result<Self> {
        Ok(Self {
            l1: Linear::new(&b.pp("l1"), primary + secondary, out)?,
            bn1: BatchNorm1d::new(&b.pp("bn1"), out)?,
            l2: Linear::new(&b.pp("l2"), out, out)?,
            bn2: BatchNorm1d::new(&b.pp("bn2"), out)?,
        })
    }

    pub fn forward(&self, primary: &Tensor, secondary: &Tensor, train: bool) -> Result<Tensor> {
        let x = Tensor::cat(&[primary, secondary], D::Minus1)?;
        let y = self.bn1.forward(&self.l1.forward(&x)?, train)?.tanh()?;
        Ok(self.bn2.forward(&self.l2.forward(&y)?, train)?.tanh()?)
    }
}

/// Action-conditioned tactile predictor: a 2-layer LSTM over
/// `[tactile ⊕ action ⊕ scene crossover]`, with the action skipped onto the
/// output layer. Emits the next normalized taxel frame.
#[derive(Clone, Debug)]
pub struct Actp {
    lstm: Lstm,
    out: Linear,
}

impl Actp {
    pub fn new(b: &Builder, tactile: usize, action: usize, crossover: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            lstm: Lstm::new(&b.pp("lstm"), tactile + action + crossover, hidden, 2)?,
            out: Linear::new(&b.pp("out"), hidden + action, TACTILE_DIM)?,
        })
    }

    pub fn zero_state(&self, batch: usize, like: &Tensor) -> Result<RecurrentState> {
        self.lstm.zero_state(batch, like)
    }

    pub fn step(
        &self,
        state: &RecurrentState,
        tactile: &Tensor,
        action: &Tensor,
        crossover: &Tensor,
    ) -> Result<(Tensor, RecurrentState)> {
        let x = Tensor::cat(&[tactile, action, crossover], D::Minus1)?;
        let (h, next) = self.lstm.step(&x, state)?;
        let y = self.out.forward(&Tensor::cat(&[&h, action], D::Minus1)?)?;
        Ok((candle_nn::ops::sigmoid(&y)?, next))
    }
}
