//! Deterministic quasi-static pushing simulator with a hidden friction patch
//! and a simulated 4×4 taxel fingertip.

mod dataset;
mod episode;
mod physics;
mod render;
mod taxels;

pub use dataset::{generate_dataset, generate_split, write_edge_cases, DatasetSpec};
pub use episode::{
    edge_case_suite, edge_case_suite_with_trajectories, generate_episode, generate_episode_with_trajectory,
    generate_random_episode, robot_state, simulate, EpisodeConfig, Pose2, PushLine, Trajectory,
    DEFAULT_PATCH_GAIN, DEFAULT_SUBSTEPS, EDGE_CASE_SEED, OBJECT_HALF_EXTENTS, PUSHER_RADIUS, PUSH_SPEED,
    TRIAL_SECONDS,
};
pub use physics::{step_push, ContactInfo, ObjectState, PusherState, Vec2};
pub use render::{
    object_mask, pixel_center, render_labels, render_scene, rgb, world_to_pixel, PixelLabel, ARENA_SIZE_M,
    BACKGROUND_RGB, OBJECT_RGB, PIXELS_PER_M, PUSHER_RGB,
};
pub use taxels::{sense_taxels, REST_NOISE_SIGMA, REST_VALUE};
