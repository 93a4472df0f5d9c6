use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default scene resolution (square).
pub const SCENE_SIZE: usize = 64;
pub const SCENE_CHANNELS: usize = 3;

pub const TAXEL_ROWS: usize = 4;
pub const TAXEL_COLS: usize = 4;
pub const TAXEL_CHANNELS: usize = 3;
/// Flattened tactile frame length (rows × cols × channels).
pub const TACTILE_DIM: usize = TAXEL_ROWS * TAXEL_COLS * TAXEL_CHANNELS;

pub const ROBOT_DIM: usize = 7;

/// Frames per second of every recorded episode.
pub const SAMPLE_RATE_HZ: f64 = 10.0;

/// An RGB image, row-major with interleaved channels, values in `[0, 1]`.
///
/// Pixel storage is reference counted so windows and batches can share
/// frames without copying.
#[derive(Clone, PartialEq)]
pub struct SceneFrame {
    height: usize,
    width: usize,
    pixels: Arc<[f32]>,
}

impl SceneFrame {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != height * width * SCENE_CHANNELS {
            return Err(Error::Contract(format!(
                "scene frame {height}x{width}x3 needs {} values, got {}",
                height * width * SCENE_CHANNELS,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!("scene pixel {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            pixels: pixels.into(),
        })
    }

    /// Builds a frame, clamping values into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        let pixels = pixels
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(height, width, pixels)
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            pixels: pixels.into(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

impl fmt::Debug for SceneFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SceneFrame")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

/// One 4×4 taxel reading; channel order per taxel is normal, shear-x, shear-y.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TactileFrame {
    pub taxels: [f32; TACTILE_DIM],
}

impl TactileFrame {
    pub fn new(taxels: [f32; TACTILE_DIM]) -> Self {
        Self { taxels }
    }

    pub fn filled(value: f32) -> Self {
        Self {
            taxels: [value; TACTILE_DIM],
        }
    }

    pub fn from_slice(values: &[f32]) -> Result<Self> {
        let taxels: [f32; TACTILE_DIM] = values.try_into().map_err(|_| {
            Error::Contract(format!("tactile frame needs {TACTILE_DIM} values, got {}", values.len()))
        })?;
        Ok(Self { taxels })
    }

    pub fn index(row: usize, col: usize, channel: usize) -> usize {
        (row * TAXEL_COLS + col) * TAXEL_CHANNELS + channel
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.taxels[Self::index(row, col, channel)]
    }

    pub fn is_finite(&self) -> bool {
        self.taxels.iter().all(|v| v.is_finite())
    }
}

/// End-effector pose in task space: position (x, y, z) then a unit
/// quaternion (qx, qy, qz, qw).
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RobotState {
    pub pose: [f32; ROBOT_DIM],
}

impl RobotState {
    pub fn new(pose: [f32; ROBOT_DIM]) -> Self {
        Self { pose }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.iter().all(|v| v.is_finite())
    }
}

/// Where the high-friction patch sits on the pushed object.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum FrictionLayout {
    Center,
    CornerTl,
    CornerTr,
    CornerBl,
    CornerBr,
    EdgeN,
    EdgeS,
    EdgeE,
    EdgeW,
    None,
}

impl FrictionLayout {
    pub const ALL: [FrictionLayout; 10] = [
        FrictionLayout::Center,
        FrictionLayout::CornerTl,
        FrictionLayout::CornerTr,
        FrictionLayout::CornerBl,
        FrictionLayout::CornerBr,
        FrictionLayout::EdgeN,
        FrictionLayout::EdgeS,
        FrictionLayout::EdgeE,
        FrictionLayout::EdgeW,
        FrictionLayout::None,
    ];

    pub const CORNERS: [FrictionLayout; 4] = [
        FrictionLayout::CornerTl,
        FrictionLayout::CornerTr,
        FrictionLayout::CornerBl,
        FrictionLayout::CornerBr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrictionLayout::Center => "center",
            FrictionLayout::CornerTl => "corner_tl",
            FrictionLayout::CornerTr => "corner_tr",
            FrictionLayout::CornerBl => "corner_bl",
            FrictionLayout::CornerBr => "corner_br",
            FrictionLayout::EdgeN => "edge_n",
            FrictionLayout::EdgeS => "edge_s",
            FrictionLayout::EdgeE => "edge_e",
            FrictionLayout::EdgeW => "edge_w",
            FrictionLayout::None => "none",
        }
    }

    /// Patch location in the object frame as a fraction of the half-extents
    /// (x along the long side, y along the short side, y up).
    pub fn unit_offset(self) -> (f64, f64) {
        match self {
            FrictionLayout::Center | FrictionLayout::None => (0.0, 0.0),
            FrictionLayout::CornerTl => (-1.0, 1.0),
            FrictionLayout::CornerTr => (1.0, 1.0),
            FrictionLayout::CornerBl => (-1.0, -1.0),
            FrictionLayout::CornerBr => (1.0, -1.0),
            FrictionLayout::EdgeN => (0.0, 1.0),
            FrictionLayout::EdgeS => (0.0, -1.0),
            FrictionLayout::EdgeE => (1.0, 0.0),
            FrictionLayout::EdgeW => (-1.0, 0.0),
        }
    }
}

impl fmt::Display for FrictionLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrictionLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrictionLayout::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown friction layout `{s}`")))
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeMeta {
    pub sample_rate_hz: f64,
    pub friction_layout: FrictionLayout,
    pub seed: u64,
    pub split_tag: String,
    pub length: usize,
    #[serde(default)]
    pub no_contact: bool,
}

/// One pushing trial with length-aligned scene, tactile and robot streams.
#[derive(Clone, PartialEq, Debug)]
pub struct Episode {
    pub scene: Vec<SceneFrame>,
    pub tactile: Vec<TactileFrame>,
    pub robot: Vec<RobotState>,
    pub meta: EpisodeMeta,
}

impl Episode {
    pub fn new(
        scene: Vec<SceneFrame>,
        tactile: Vec<TactileFrame>,
        robot: Vec<RobotState>,
        meta: EpisodeMeta,
    ) -> Result<Self> {
        let episode = Self {
            scene,
            tactile,
            robot,
            meta,
        };
        episode.validate()?;
        Ok(episode)
    }

    pub fn len(&self) -> usize {
        self.scene.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scene.len();
        if self.tactile.len() != n {
            return Err(Error::LengthMismatch {
                field: "tactile".into(),
                expected: n,
                found: self.tactile.len(),
            });
        }
        if self.robot.len() != n {
            return Err(Error::LengthMismatch {
                field: "robot".into(),
                expected: n,
                found: self.robot.len(),
            });
        }
        if self.meta.length != n {
            return Err(Error::LengthMismatch {
                field: "meta.length".into(),
                expected: n,
                found: self.meta.length,
            });
        }
        if let Some(first) = self.scene.first() {
            if self
                .scene
                .iter()
                .any(|f| f.height() != first.height() || f.width() != first.width())
            {
                return Err(Error::Contract("scene frame shape varies within episode".into()));
            }
        }
        Ok(())
    }

    /// Copy of this episode with every tactile frame mapped through `f`.
    pub fn map_tactile(&self, f: impl Fn(&TactileFrame) -> TactileFrame) -> Episode {
        Episode {
            scene: self.scene.clone(),
            tactile: self.tactile.iter().map(f).collect(),
            robot: self.robot.clone(),
            meta: self.meta.clone(),
        }
    }
}
