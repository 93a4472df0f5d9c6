use super::physics::{ObjectState, PusherState, Vec2};
use crate::episode::{SceneFrame, SCENE_SIZE};

/// Side length of the square arena, meters.
pub const ARENA_SIZE_M: f64 = 0.5;
pub const PIXELS_PER_M: f64 = SCENE_SIZE as f64 / ARENA_SIZE_M;

pub const BACKGROUND_RGB: [u8; 3] = [40, 44, 52];
pub const OBJECT_RGB: [u8; 3] = [232, 150, 40];
pub const PUSHER_RGB: [u8; 3] = [70, 130, 235];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PixelLabel {
    Background = 0,
    Object = 1,
    Pusher = 2,
}

pub fn rgb(c: [u8; 3]) -> [f32; 3] {
    [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0]
}

/// World coordinates of a pixel centre (row 0 is the far edge, +y up).
pub fn pixel_center(row: usize, col: usize) -> Vec2 {
    [
        (col as f64 + 0.5) / PIXELS_PER_M,
        ARENA_SIZE_M - (row as f64 + 0.5) / PIXELS_PER_M,
    ]
}

/// World point to fractional pixel coordinates `(row, col)`.
pub fn world_to_pixel(p: Vec2) -> (f64, f64) {
    ((ARENA_SIZE_M - p[1]) * PIXELS_PER_M - 0.5, p[0] * PIXELS_PER_M - 0.5)
}

/// Per-pixel labels sampled at pixel centres; the pusher is drawn over the
/// object. The friction patch has no visual footprint.
pub fn render_labels(obj: &ObjectState, pusher: &PusherState) -> Vec<PixelLabel> {
    let n = SCENE_SIZE;
    let r2 = pusher.radius * pusher.radius;
    let mut labels = vec![PixelLabel::Background; n * n];
    for row in 0..n {
        for col in 0..n {
            let p = pixel_center(row, col);
            let d = [p[0] - pusher.tip[0], p[1] - pusher.tip[1]];
            labels[row * n + col] = if d[0] * d[0] + d[1] * d[1] <= r2 {
                PixelLabel::Pusher
            } else if obj.contains(p) {
                PixelLabel::Object
            } else {
                PixelLabel::Background
            };
        }
    }
    labels
}

/// Object-only mask (ignoring the pusher), used as location ground truth.
pub fn object_mask(obj: &ObjectState) -> Vec<bool> {
    let n = SCENE_SIZE;
    (0..n * n).map(|i| obj.contains(pixel_center(i / n, i % n))).collect()
}

pub fn render_scene(obj: &ObjectState, pusher: &PusherState) -> SceneFrame {
    let palette = [rgb(BACKGROUND_RGB), rgb(OBJECT_RGB), rgb(PUSHER_RGB)];
    let pixels: Vec<f32> = render_labels(obj, pusher)
        .into_iter()
        .flat_map(|l| palette[l as usize])
        .collect();
    SceneFrame::new(SCENE_SIZE, SCENE_SIZE, pixels).expect("palette colours are in range")
}
