use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::physics::{step_push, ContactInfo, ObjectState, PusherState};
use super::render::render_scene;
use super::taxels::sense_taxels;
use crate::episode::{Episode, EpisodeMeta, FrictionLayout, RobotState, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::seed::mix_seed;

/// Box footprint, meters (16.1 cm × 10.1 cm).
pub const OBJECT_HALF_EXTENTS: [f64; 2] = [0.0805, 0.0505];
pub const PUSHER_RADIUS: f64 = 0.016;
pub const PUSH_SPEED: f64 = 0.06;
pub const TRIAL_SECONDS: f64 = 4.0;
/// Fixed fingertip height reported in the robot state.
pub const TIP_HEIGHT: f64 = 0.1;
/// Patch centre as a fraction of the half-extents.
pub const PATCH_FRACTION: f64 = 0.8;
/// Friction multiplier of the patch relative to the bare surface.
pub const DEFAULT_PATCH_GAIN: f64 = 4.0;
pub const DEFAULT_SUBSTEPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushLine {
    pub start: [f64; 2],
    pub angle: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub layout: FrictionLayout,
    pub start: Pose2,
    pub push: PushLine,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Physics steps per recorded frame.
    pub substeps: usize,
    pub patch_gain: f64,
    pub tactile_noise: bool,
}

impl EpisodeConfig {
    /// The fixed start pose and push line shared by the edge-case suite: the
    /// fingertip approaches the middle of the short side head-on.
    pub fn canonical(layout: FrictionLayout) -> Self {
        let start = Pose2 {
            x: 0.17,
            y: 0.25,
            heading: 0.0,
        };
        let gap = 0.02;
        Self {
            layout,
            start,
            push: PushLine {
                start: [start.x - OBJECT_HALF_EXTENTS[0] - PUSHER_RADIUS - gap, start.y],
                angle: 0.0,
                speed: PUSH_SPEED,
            },
            duration_s: TRIAL_SECONDS,
            rate_hz: SAMPLE_RATE_HZ,
            substeps: DEFAULT_SUBSTEPS,
            patch_gain: DEFAULT_PATCH_GAIN,
            tactile_noise: true,
        }
    }

    /// Randomised start pose and push line around the canonical set-up.
    pub fn sample(layout: FrictionLayout, rng: &mut impl Rng) -> Self {
        let mut cfg = Self::canonical(layout);
        cfg.start.x += rng.random_range(-0.02..0.02);
        cfg.start.y += rng.random_range(-0.03..0.03);
        cfg.start.heading = rng.random_range(-0.2..0.2);
        let gap = rng.random_range(0.0..0.05);
        let lateral = rng.random_range(-0.02..0.02);
        cfg.push = PushLine {
            start: [
                cfg.start.x - OBJECT_HALF_EXTENTS[0] - PUSHER_RADIUS - gap,
                cfg.start.y + lateral,
            ],
            angle: rng.random_range(-0.08..0.08),
            speed: PUSH_SPEED,
        };
        cfg
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }

    pub fn initial_object(&self) -> ObjectState {
        let (ux, uy) = self.layout.unit_offset();
        let gain = if self.layout == FrictionLayout::None {
            1.0
        } else {
            self.patch_gain
        };
        ObjectState {
            position: [self.start.x, self.start.y],
            heading: self.start.heading,
            half_extents: OBJECT_HALF_EXTENTS,
            friction_patch: [
                ux * PATCH_FRACTION * OBJECT_HALF_EXTENTS[0],
                uy * PATCH_FRACTION * OBJECT_HALF_EXTENTS[1],
            ],
            patch_gain: gain,
        }
    }

    pub fn initial_pusher(&self) -> PusherState {
        PusherState::new(self.push.start, self.push.angle, self.push.speed, PUSHER_RADIUS)
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.rate_hz > 0.0 && self.substeps > 0 && self.patch_gain >= 1.0) {
            return Err(Error::Config(format!("invalid episode config {self:?}")));
        }
        Ok(())
    }
}

/// Simulator state at every recorded frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub objects: Vec<ObjectState>,
    pub pushers: Vec<PusherState>,
    pub contacts: Vec<ContactInfo>,
}

impl Trajectory {
    pub fn any_contact(&self) -> bool {
        self.contacts.iter().any(|c| c.in_contact)
    }
}

/// Runs the push. Frame `k` shows the state at `k / rate_hz`; its contact is
/// the one seen on the last physics step before that instant.
pub fn simulate(config: &EpisodeConfig) -> Result<Trajectory> {
    config.validate()?;
    let n = config.frames();
    let dt = 1.0 / (config.rate_hz * config.substeps as f64);
    let mut obj = config.initial_object();
    let mut pusher = config.initial_pusher();
    let (_, mut contact) = step_push(&obj, &pusher, 0.0);

    let mut traj = Trajectory {
        objects: Vec::with_capacity(n),
        pushers: Vec::with_capacity(n),
        contacts: Vec::with_capacity(n),
    };
    for k in 0..n {
        traj.objects.push(obj);
        traj.pushers.push(pusher);
        traj.contacts.push(contact);
        if k + 1 == n {
            break;
        }
        let mut touched = ContactInfo::none();
        for _ in 0..config.substeps {
            let (next, c) = step_push(&obj, &pusher, dt);
            obj = next;
            pusher = pusher.advanced(dt);
            touched = c;
        }
        contact = touched;
    }
    Ok(traj)
}

pub fn robot_state(pusher: &PusherState) -> RobotState {
    let half = pusher.angle() / 2.0;
    RobotState::new([
        pusher.tip[0] as f32,
        pusher.tip[1] as f32,
        TIP_HEIGHT as f32,
        0.0,
        0.0,
        half.sin() as f32,
        half.cos() as f32,
    ])
}

pub fn generate_episode_with_trajectory(config: &EpisodeConfig, seed: u64) -> Result<(Episode, Trajectory)> {
    let traj = simulate(config)?;
    let n = traj.objects.len();
    let mut scene = Vec::with_capacity(n);
    let mut tactile = Vec::with_capacity(n);
    let mut robot = Vec::with_capacity(n);
    for k in 0..n {
        scene.push(render_scene(&traj.objects[k], &traj.pushers[k]));
        let noise = config.tactile_noise.then(|| mix_seed(seed, k as u64));
        tactile.push(sense_taxels(&traj.contacts[k], noise));
        robot.push(robot_state(&traj.pushers[k]));
    }
    let meta = EpisodeMeta {
        sample_rate_hz: config.rate_hz,
        friction_layout: config.layout,
        seed,
        split_tag: String::new(),
        length: n,
        no_contact: !traj.any_contact(),
    };
    let episode = Episode::new(scene, tactile, robot, meta)?;
    Ok((episode, traj))
}

pub fn generate_episode(config: &EpisodeConfig, seed: u64) -> Result<Episode> {
    generate_episode_with_trajectory(config, seed).map(|(e, _)| e)
}

/// Samples a configuration for `layout` from `seed` and generates it.
pub fn generate_random_episode(layout: FrictionLayout, seed: u64) -> Result<(EpisodeConfig, Episode)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = EpisodeConfig::sample(layout, &mut rng);
    let episode = generate_episode(&config, seed)?;
    Ok((config, episode))
}

/// Seed shared by the edge-case suite so all four trials see the same sensor
/// noise draw.
pub const EDGE_CASE_SEED: u64 = 0x5EED_ED6E;

/// Four identical pushes with the patch in each corner.
pub fn edge_case_suite_with_trajectories() -> Result<Vec<(Episode, Trajectory)>> {
    FrictionLayout::CORNERS
        .iter()
        .map(|&layout| {
            let (mut ep, traj) = generate_episode_with_trajectory(&EpisodeConfig::canonical(layout), EDGE_CASE_SEED)?;
            ep.meta.split_tag = "edge".into();
            Ok((ep, traj))
        })
        .collect()
}

pub fn edge_case_suite() -> Result<Vec<Episode>> {
    Ok(edge_case_suite_with_trajectories()?.into_iter().map(|(e, _)| e).collect())
}
