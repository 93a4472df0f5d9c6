use serde::{Deserialize, Serialize};

use super::types::{Episode, TactileFrame, TACTILE_DIM};
use crate::error::{Error, Result};

/// Per-taxel-channel min/max over a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl NormStats {
    /// Stats that leave `[0, 1]` data unchanged.
    pub fn identity() -> Self {
        Self {
            min: vec![0.0; TACTILE_DIM],
            max: vec![1.0; TACTILE_DIM],
        }
    }

    pub fn is_degenerate(&self, channel: usize) -> bool {
        self.max[channel] <= self.min[channel]
    }
}

pub fn compute_tactile_stats<'a>(episodes: impl IntoIterator<Item = &'a Episode>) -> Result<NormStats> {
    let mut min = vec![f32::INFINITY; TACTILE_DIM];
    let mut max = vec![f32::NEG_INFINITY; TACTILE_DIM];
    let mut frames = 0usize;
    for ep in episodes {
        for frame in &ep.tactile {
            for (k, &v) in frame.taxels.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(Error::Contract("tactile statistics need at least one frame".into()));
    }
    Ok(NormStats { min, max })
}

/// Min-max scales each channel into `[0, 1]`, clamping values outside the
/// training range. Constant channels map to 0.5.
pub fn normalize_tactile(frame: &TactileFrame, stats: &NormStats) -> TactileFrame {
    let mut out = [0.0f32; TACTILE_DIM];
    for (k, v) in out.iter_mut().enumerate() {
        let (lo, hi) = (stats.min[k], stats.max[k]);
        *v = if hi <= lo {
            0.5
        } else {
            ((frame.taxels[k] - lo) / (hi - lo)).clamp(0.0, 1.0)
        };
    }
    TactileFrame::new(out)
}

pub fn normalize_episode(episode: &Episode, stats: &NormStats) -> Episode {
    episode.map_tactile(|f| normalize_tactile(f, stats))
}
