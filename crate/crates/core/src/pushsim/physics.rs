//! Quasi-static planar pushing of a rectangle by a disc-shaped fingertip.
//!
//! The object carries a hidden high-friction patch. Its effective friction
//! centroid sits between the geometric centre (uniform support) and the
//! patch, `offset * (gain - 1) / gain`. Whenever the fingertip penetrates the
//! object, the object rotates about that centroid in proportion to the moment
//! arm of the push line and translates along the push direction until the
//! penetration is resolved.

use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

/// Smallest contact-normal cosine used when converting penetration into push
/// distance; bounds the displacement of grazing contacts.
const MIN_CONTACT_COS: f64 = 0.2;
const RESOLVE_ITERATIONS: usize = 4;

/// Baseline normal force while pushing, in simulator units.
pub const BASE_NORMAL_FORCE: f64 = 1.0;
/// Lateral shear per unit of normalized rotation rate.
const SHEAR_PER_TURN: f64 = 1.6;
/// Lateral shear from the contact sitting off the pad centre.
const SHEAR_PER_TILT: f64 = 0.3;
/// Vertical (downward drag) shear as a fraction of the normal force.
const VERTICAL_SHEAR_RATIO: f64 = 0.25;
/// Pad half-width in taxel pitches.
const PAD_HALF_WIDTH_TAXELS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: Vec2,
    pub heading: f64,
    pub half_extents: Vec2,
    /// Patch centre in the object frame.
    pub friction_patch: Vec2,
    pub patch_gain: f64,
}

impl ObjectState {
    pub fn is_valid(&self) -> bool {
        self.half_extents[0] > 0.0
            && self.half_extents[1] > 0.0
            && self.friction_patch[0].abs() <= self.half_extents[0]
            && self.friction_patch[1].abs() <= self.half_extents[1]
            && self.patch_gain >= 1.0
    }

    /// Effective friction centroid in the object frame.
    pub fn friction_centroid_local(&self) -> Vec2 {
        let k = (self.patch_gain - 1.0) / self.patch_gain;
        [self.friction_patch[0] * k, self.friction_patch[1] * k]
    }

    pub fn friction_centroid_world(&self) -> Vec2 {
        self.to_world(self.friction_centroid_local())
    }

    /// Squared radius of gyration of the uniform rectangle.
    pub fn gyration_sq(&self) -> f64 {
        let [l, w] = self.half_extents;
        (l * l + w * w) / 3.0
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        rotate(sub(p, self.position), -self.heading)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        add(rotate(p, self.heading), self.position)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_local(p);
        q[0].abs() <= self.half_extents[0] && q[1].abs() <= self.half_extents[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PusherState {
    pub tip: Vec2,
    /// Unit push direction.
    pub direction: Vec2,
    pub speed: f64,
    pub radius: f64,
}

impl PusherState {
    pub fn new(tip: Vec2, angle: f64, speed: f64, radius: f64) -> Self {
        Self {
            tip,
            direction: [angle.cos(), angle.sin()],
            speed,
            radius,
        }
    }

    pub fn angle(&self) -> f64 {
        self.direction[1].atan2(self.direction[0])
    }

    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            tip: add(self.tip, scale(self.direction, self.speed * dt)),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactInfo {
    pub in_contact: bool,
    /// Contact point on the object surface, object frame.
    pub point: Vec2,
    pub normal_force: f64,
    /// (lateral, vertical) shear at the fingertip.
    pub tangential: Vec2,
    /// Lateral position of the contact on the fingertip pad, in taxel
    /// pitches from the pad centre.
    pub pad_offset: f64,
}

impl ContactInfo {
    pub fn none() -> Self {
        Self::default()
    }
}

struct SurfaceQuery {
    /// Closest surface point, object frame.
    closest: Vec2,
    /// Outward unit normal at `closest`, object frame.
    normal: Vec2,
    /// Signed distance from the query point to the boundary (negative inside).
    distance: f64,
}

fn query_surface(obj: &ObjectState, p_world: Vec2) -> SurfaceQuery {
    let q = obj.to_local(p_world);
    let [l, w] = obj.half_extents;
    let dx = q[0].abs() - l;
    let dy = q[1].abs() - w;
    if dx > 0.0 || dy > 0.0 {
        let closest = [q[0].clamp(-l, l), q[1].clamp(-w, w)];
        let d = sub(q, closest);
        let dist = norm(d);
        SurfaceQuery {
            closest,
            normal: scale(d, 1.0 / dist),
            distance: dist,
        }
    } else if dx > dy {
        let sx = q[0].signum();
        SurfaceQuery {
            closest: [sx * l, q[1]],
            normal: [sx, 0.0],
            distance: dx,
        }
    } else {
        let sy = q[1].signum();
        SurfaceQuery {
            closest: [q[0], sy * w],
            normal: [0.0, sy],
            distance: dy,
        }
    }
}

fn penetration(obj: &ObjectState, pusher: &PusherState) -> (f64, SurfaceQuery) {
    let s = query_surface(obj, pusher.tip);
    (pusher.radius - s.distance, s)
}

/// Advances the fingertip by `speed * dt` and resolves contact quasi-statically.
///
/// Returns the new object state and the contact seen during the step. A
/// non-positive `dt` is treated as a pure contact query.
pub fn step_push(obj: &ObjectState, pusher: &PusherState, dt: f64) -> (ObjectState, ContactInfo) {
    let pusher = if dt > 0.0 { pusher.advanced(dt) } else { *pusher };
    let u = pusher.direction;
    let (pen, surface) = penetration(obj, &pusher);
    if pen <= 0.0 {
        return (*obj, ContactInfo::none());
    }

    let n_world = rotate(surface.normal, obj.heading);
    let cos_a = (-dot(u, n_world)).max(MIN_CONTACT_COS);
    let push = pen / cos_a;

    let contact_world = obj.to_world(surface.closest);
    let centroid = obj.friction_centroid_world();
    let r = sub(centroid, contact_world);
    let moment_arm = cross(u, r);
    let turn_rate = moment_arm / (obj.gyration_sq() + dot(r, r));
    let dtheta = push * turn_rate;

    let mut next = *obj;
    next.position = add(centroid, rotate(sub(obj.position, centroid), dtheta));
    next.heading = obj.heading + dtheta;
    next.position = add(next.position, scale(u, push));

    for _ in 0..RESOLVE_ITERATIONS {
        let (residual, s) = penetration(&next, &pusher);
        if residual <= 1e-12 {
            break;
        }
        let n = rotate(s.normal, next.heading);
        let c = (-dot(u, n)).max(MIN_CONTACT_COS);
        next.position = add(next.position, scale(u, residual / c));
    }

    // Tilt of the contact on the fingertip: the pad sees the contact at -n.
    let sin_tilt = cross(u, scale(n_world, -1.0));
    let rho = obj.gyration_sq().sqrt();
    let turn = rho * turn_rate;
    let normal_force = BASE_NORMAL_FORCE * cos_a * (1.0 + 0.5 * turn.abs());
    let lateral = BASE_NORMAL_FORCE * (SHEAR_PER_TURN * turn + SHEAR_PER_TILT * sin_tilt);
    let contact = ContactInfo {
        in_contact: true,
        point: surface.closest,
        normal_force,
        tangential: [lateral, VERTICAL_SHEAR_RATIO * normal_force],
        pad_offset: (PAD_HALF_WIDTH_TAXELS * sin_tilt).clamp(-PAD_HALF_WIDTH_TAXELS, PAD_HALF_WIDTH_TAXELS),
    };
    (next, contact)
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(a: Vec2, k: f64) -> Vec2 {
    [a[0] * k, a[1] * k]
}

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

pub fn rotate(a: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn object(patch: Vec2, gain: f64) -> ObjectState {
        ObjectState {
            position: [0.2, 0.25],
            heading: 0.0,
            half_extents: [0.08, 0.05],
            friction_patch: patch,
            patch_gain: gain,
        }
    }

    #[test]
    fn no_contact_leaves_object_untouched() {
        let obj = object([0.06, 0.04], 4.0);
        let pusher = PusherState::new([0.0, 0.25], 0.0, 0.06, 0.016);
        let (next, contact) = step_push(&obj, &pusher, 0.01);
        assert_eq!(next, obj);
        assert_eq!(contact, ContactInfo::none());
    }

    #[test]
    fn push_through_friction_centroid_only_translates() {
        let obj = object([0.06, 0.04], 4.0);
        let c = obj.friction_centroid_world();
        let mut pusher = PusherState::new([0.2 - 0.08 - 0.016 + 0.001, c[1]], 0.0, 0.06, 0.016);
        let mut state = obj;
        for _ in 0..50 {
            let (next, contact) = step_push(&state, &pusher, 0.01);
            assert!(contact.in_contact);
            assert!((next.heading - state.heading).abs() < 1e-9);
            state = next;
            pusher = pusher.advanced(0.01);
        }
        assert!(state.position[0] > obj.position[0] + 0.02);
    }

    #[test]
    fn patch_above_push_line_turns_counter_clockwise() {
        let up = object([-0.06, 0.04], 4.0);
        let down = object([-0.06, -0.04], 4.0);
        let pusher = PusherState::new([0.2 - 0.08 - 0.016 + 0.002, 0.25], 0.0, 0.06, 0.016);
        let (a, ca) = step_push(&up, &pusher, 0.01);
        let (b, cb) = step_push(&down, &pusher, 0.01);
        assert!(a.heading > 0.0);
        assert!(b.heading < 0.0);
        assert!(ca.tangential[0] > 0.0 && cb.tangential[0] < 0.0);
        assert!(ca.normal_force >= 0.0);
    }

    #[test]
    fn deep_penetration_is_resolved() {
        let obj = object([0.0, 0.0], 1.0);
        let pusher = PusherState::new([0.2 - 0.06, 0.25], 0.0, 0.06, 0.016);
        let (next, contact) = step_push(&obj, &pusher, 0.01);
        assert!(contact.in_contact);
        let (pen, _) = penetration(&next, &pusher.advanced(0.01));
        assert!(pen <= 1e-9, "{pen}");
    }
}
