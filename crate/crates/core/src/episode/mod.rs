//! Domain types shared by every other module: frames, episodes, windows,
//! tactile normalization and the on-disk dataset format.

mod dataset;
mod io;
mod norm;
mod types;
mod window;

pub use dataset::{episode_dirs, load_split, read_manifest, write_manifest, Manifest, MANIFEST_FILE};
pub use io::{load_episode, save_episode, save_frame_png};
pub use norm::{compute_tactile_stats, normalize_episode, normalize_tactile, NormStats};
pub use types::{
    Episode, EpisodeMeta, FrictionLayout, RobotState, SceneFrame, TactileFrame, ROBOT_DIM, SAMPLE_RATE_HZ,
    SCENE_CHANNELS, SCENE_SIZE, TACTILE_DIM, TAXEL_CHANNELS, TAXEL_COLS, TAXEL_ROWS,
};
pub use window::{make_windows, window_count, SequenceSample};
