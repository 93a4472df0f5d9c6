use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "SVG")]
    Svg,
    #[serde(rename = "SVG_TE")]
    SvgTe,
    #[serde(rename = "SVTG")]
    Svtg,
    #[serde(rename = "SPOTS")]
    Spots,
    #[serde(rename = "SPOTS_SMALL")]
    SpotsSmall,
    #[serde(rename = "SPOTS_SOP")]
    SpotsSop,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Svg,
        ModelKind::SvgTe,
        ModelKind::Svtg,
        ModelKind::Spots,
        ModelKind::SpotsSmall,
        ModelKind::SpotsSop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svg => "SVG",
            ModelKind::SvgTe => "SVG_TE",
            ModelKind::Svtg => "SVTG",
            ModelKind::Spots => "SPOTS",
            ModelKind::SpotsSmall => "SPOTS_SMALL",
            ModelKind::SpotsSop => "SPOTS_SOP",
        }
    }

    /// Reads tactile input at all.
    pub fn uses_tactile(self) -> bool {
        self != ModelKind::Svg
    }

    /// Predicts tactile frames.
    pub fn predicts_tactile(self) -> bool {
        !matches!(self, ModelKind::Svg | ModelKind::SvgTe)
    }

    /// Dual-pipeline kinds with MMFM fusion and an ACTP tactile pipeline.
    pub fn is_dual_pipeline(self) -> bool {
        matches!(self, ModelKind::Spots | ModelKind::SpotsSmall | ModelKind::SpotsSop)
    }

    /// Prior and posterior see tactile features.
    pub fn tactile_in_prior(self) -> bool {
        matches!(self, ModelKind::Svtg | ModelKind::Spots | ModelKind::SpotsSmall)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    /// Base channel width of the convolutional pyramid.
    pub nf: usize,
    pub g_dim: usize,
    pub m_dim: usize,
    pub z_dim: usize,
    /// Recurrent hidden size of the scene predictor, prior and posterior.
    pub hidden: usize,
    /// Hidden size of the ACTP tactile pipeline.
    pub actp_hidden: usize,
    /// Overrides `hidden` for the scene pipeline; SPOTS_SMALL resolves it by
    /// parameter-parity search when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_hidden: Option<usize>,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            nf: 32,
            g_dim: 128,
            m_dim: 32,
            z_dim: 10,
            hidden: 256,
            actp_hidden: 240,
            scene_hidden: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub dims: Dims,
    /// Number of observed context frames `c`.
    pub context: usize,
    /// Number of predicted frames; the window spans `context + horizon` frames.
    pub horizon: usize,
    pub beta: f64,
    pub tactile_loss_weight: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            dims: Dims::default(),
            context: 2,
            horizon: 5,
            beta: 1e-4,
            tactile_loss_weight: 1.0,
        }
    }

    /// Index of the final frame of a window, `T = c + horizon - 1`.
    pub fn last(&self) -> usize {
        self.context + self.horizon - 1
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Effective recurrent size of the scene pipeline.
    pub fn scene_hidden(&self) -> usize {
        let base = self.dims.scene_hidden.unwrap_or(self.dims.hidden);
        if self.kind == ModelKind::Svtg {
            2 * base
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        let dims_ok = [d.nf, d.g_dim, d.m_dim, d.z_dim, d.hidden, d.actp_hidden]
            .iter()
            .all(|&v| v > 0)
            && d.scene_hidden != Some(0);
        if !dims_ok {
            return Err(Error::Config(format!("model dims must be positive: {d:?}")));
        }
        if self.context < 1 || self.horizon < 1 {
            return Err(Error::Config(format!(
                "need context >= 1 and horizon >= 1, got {} and {}",
                self.context, self.horizon
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.tactile_loss_weight >= 0.0 && self.tactile_loss_weight.is_finite()) {
            return Err(Error::Config(format!(
                "tactile_loss_weight must be finite and >= 0, got {}",
                self.tactile_loss_weight
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("spots-sop".parse::<ModelKind>().unwrap(), ModelKind::SpotsSop);
        assert!("SAVP".parse::<ModelKind>().is_err());
    }

    #[test]
    fn table_flags() {
        assert!(!ModelKind::Svg.uses_tactile());
        assert!(ModelKind::SvgTe.uses_tactile() && !ModelKind::SvgTe.predicts_tactile());
        assert!(ModelKind::Svtg.predicts_tactile() && !ModelKind::Svtg.is_dual_pipeline());
        assert!(ModelKind::SpotsSop.is_dual_pipeline() && !ModelKind::SpotsSop.tactile_in_prior());
    }

    #[test]
    fn last_index_and_validation() {
        let c = ModelConfig::new(ModelKind::Svg);
        assert_eq!(c.last(), 6);
        assert_eq!(c.with_horizon(15).last(), 16);
        let mut bad = c.clone();
        bad.context = 0;
        assert!(bad.validate().is_err());
        let mut svtg = ModelConfig::new(ModelKind::Svtg);
        svtg.dims.hidden = 100;
        assert_eq!(svtg.scene_hidden(), 200);
    }
}
