use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::episode::{SceneFrame, SequenceSample, TactileFrame, ROBOT_DIM, SCENE_CHANNELS, TACTILE_DIM, TAXEL_CHANNELS, TAXEL_COLS, TAXEL_ROWS};
use crate::error::{Error, Result};

/// Width of the action input: start state ⊕ current state.
pub const ACTION_DIM: usize = 2 * ROBOT_DIM;

/// A batch of windows laid out per timestep.
#[derive(Clone, Debug)]
pub struct Batch {
    /// `(batch, 3, H, W)` for each frame `0..=last`.
    pub scene: Vec<Tensor>,
    /// `(batch, 48)` for each frame.
    pub tactile: Vec<Tensor>,
    /// `(batch, 14)`: `[a_0 ⊕ a_t]` for each frame.
    pub actions: Vec<Tensor>,
    pub context: usize,
    pub last: usize,
}

impl Batch {
    pub fn from_samples(samples: &[SequenceSample], dtype: DType, device: &Device) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Contract("empty batch".into()))?;
        for s in samples {
            s.validate()?;
            if s.context != first.context || s.last != first.last {
                return Err(Error::Contract("batch samples disagree on context/last".into()));
            }
        }
        let (context, last) = (first.context, first.last);
        let b = samples.len();
        let frame = first.scene(0);
        let (h, w) = (frame.height(), frame.width());
        let mut scene = Vec::with_capacity(last + 1);
        let mut tactile = Vec::with_capacity(last + 1);
        let mut actions = Vec::with_capacity(last + 1);
        for t in 0..=last {
            let mut px = Vec::with_capacity(b * SCENE_CHANNELS * h * w);
            let mut tx = Vec::with_capacity(b * TACTILE_DIM);
            let mut ax = Vec::with_capacity(b * ACTION_DIM);
            for s in samples {
                let f = s.scene(t);
                if f.height() != h || f.width() != w {
                    return Err(Error::Contract("scene frame sizes differ within a batch".into()));
                }
                px.extend(hwc_to_chw(f));
                tx.extend_from_slice(&s.tactile(t).taxels);
                ax.extend_from_slice(&s.actions[0].pose);
                ax.extend_from_slice(&s.actions[t].pose);
            }
            scene.push(Tensor::from_vec(px, (b, SCENE_CHANNELS, h, w), device)?.to_dtype(dtype)?);
            tactile.push(Tensor::from_vec(tx, (b, TACTILE_DIM), device)?.to_dtype(dtype)?);
            actions.push(Tensor::from_vec(ax, (b, ACTION_DIM), device)?.to_dtype(dtype)?);
        }
        Ok(Self {
            scene,
            tactile,
            actions,
            context,
            last,
        })
    }

    pub fn size(&self) -> Result<usize> {
        Ok(self.scene[0].dim(0)?)
    }

    pub fn horizon(&self) -> usize {
        self.last + 1 - self.context
    }
}

fn hwc_to_chw(f: &SceneFrame) -> Vec<f32> {
    let (h, w) = (f.height(), f.width());
    let p = f.pixels();
    let mut out = vec![0.0; SCENE_CHANNELS * h * w];
    for i in 0..h * w {
        for c in 0..SCENE_CHANNELS {
            out[c * h * w + i] = p[i * SCENE_CHANNELS + c];
        }
    }
    out
}

/// `(batch, 3, H, W)` tensor to host frames, clamped to `[0, 1]`.
pub fn tensor_to_frames(t: &Tensor) -> Result<Vec<SceneFrame>> {
    let (b, c, h, w) = t.dims4()?;
    if c != SCENE_CHANNELS {
        return Err(Error::Contract(format!("expected {SCENE_CHANNELS} channels, got {c}")));
    }
    let v: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    (0..b)
        .map(|n| {
            let base = n * c * h * w;
            let mut px = vec![0.0f32; c * h * w];
            for i in 0..h * w {
                for ch in 0..c {
                    px[i * c + ch] = v[base + ch * h * w + i];
                }
            }
            SceneFrame::from_clamped(h, w, px)
        })
        .collect()
}

/// `(batch, 48)` tensor to host taxel frames.
pub fn tensor_to_tactile(t: &Tensor) -> Result<Vec<TactileFrame>> {
    let v: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    v.chunks(TACTILE_DIM).map(TactileFrame::from_slice).collect()
}

/// Taxel vectors `(batch, 48)` as a `(batch, 3, 4, 4)` image, one channel per
/// force component.
pub fn taxels_to_grid(d: &Tensor) -> Result<Tensor> {
    let b = d.dim(0)?;
    Ok(d
        .reshape((b, TAXEL_ROWS, TAXEL_COLS, TAXEL_CHANNELS))?
        .permute((0, 3, 1, 2))?
        .contiguous()?)
}

/// Nearest-neighbour upscaling of taxel vectors to `(batch, 3, size, size)`.
pub fn taxels_to_image(d: &Tensor, size: usize) -> Result<Tensor> {
    Ok(taxels_to_grid(d)?.upsample_nearest2d(size, size)?)
}

/// Inverse of [`taxels_to_image`]: the mean of each taxel's block.
pub fn image_to_taxels(img: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = img.dims4()?;
    if c != TAXEL_CHANNELS || h % TAXEL_ROWS != 0 || w % TAXEL_COLS != 0 {
        return Err(Error::Contract(format!("cannot pool a {c}×{h}×{w} image onto the taxel grid")));
    }
    let k = h / TAXEL_ROWS;
    Ok(img
        .avg_pool2d(k)?
        .permute((0, 2, 3, 1))?
        .contiguous()?
        .reshape((b, TACTILE_DIM))?)
}

/// Source of standard-normal latent noise. Counts every draw.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: Option<ChaCha8Rng>,
    draws: usize,
}

impl NoiseStream {
    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            draws: 0,
        }
    }

    /// Always yields zeros, making test-mode rollouts follow the prior mean.
    pub fn zeros() -> Self {
        Self { rng: None, draws: 0 }
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn draw(&mut self, batch: usize, z_dim: usize, dtype: DType, device: &Device) -> Result<Tensor> {
        self.draws += 1;
        let t = match &mut self.rng {
            None => Tensor::zeros((batch, z_dim), dtype, device)?,
            Some(rng) => {
                let v: Vec<f32> = (0..batch * z_dim).map(|_| StandardNormal.sample(rng)).collect();
                Tensor::from_vec(v, (batch, z_dim), device)?.to_dtype(dtype)?
            }
        };
        Ok(t)
    }
}
