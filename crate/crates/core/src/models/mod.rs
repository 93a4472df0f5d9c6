//! The six model kinds assembled from `nets` blocks, their rollouts, and the
//! checkpoint format.

mod anaesthetise;
mod batch;
mod checkpoint;
mod config;
mod model;

pub use anaesthetise::anaesthetise;
pub use batch::{image_to_taxels, taxels_to_grid, taxels_to_image, tensor_to_frames, tensor_to_tactile, Batch, NoiseStream, ACTION_DIM};
pub use checkpoint::{config_hash, load_checkpoint, read_checkpoint_info, save_checkpoint, CheckpointInfo};
pub use config::{Dims, ModelConfig, ModelKind};
pub use model::{
    build_model, count_config_parameters, resolve_config, LatentStep, Model, Prediction, RolloutMode, PARAM_GROUPS,
    PARITY_TOLERANCE,
};
