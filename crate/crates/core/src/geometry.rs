//! Capsule primitives used for the avatar body and the contact-force proxy.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Torso,
    Head,
    RightUpperArm,
    RightForearm,
    RightHand,
    LeftUpperArm,
    LeftForearm,
    LeftHand,
}

/// Segment `a → b` swept by a sphere of `radius`. A sphere is a capsule with `a == b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub part: BodyPart,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

/// Parameter `t ∈ [0, 1]` of the point on segment `a → b` closest to `p`.
pub fn closest_param(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return 0.0;
    }
    ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let t = closest_param(p, a, b);
    (p - (a + (b - a) * t)).norm()
}

impl Capsule {
    pub fn sphere(part: BodyPart, center: Vector3<f64>, radius: f64) -> Self {
        Self { part, a: center, b: center, radius }
    }

    /// Signed distance from `p` to the capsule surface (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        point_segment_distance(p, &self.a, &self.b) - self.radius
    }

    /// How far `p` is inside the capsule; 0 when outside.
    pub fn penetration(&self, p: &Vector3<f64>) -> f64 {
        (-self.signed_distance(p)).max(0.0)
    }
}
