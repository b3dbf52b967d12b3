//! Rigid-body poses.

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tolerance on the quaternion norm accepted when a pose is built from raw
/// numbers (wire input, traces). The stored quaternion is always renormalized.
pub const QUAT_INPUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoseError {
    #[error("quaternion norm {0} is not 1")]
    NotUnit(f64),
    #[error("pose contains a non-finite component")]
    NonFinite,
}

/// Position in meters plus unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6 {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose6 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose6 {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// URDF-style `xyz` + `rpy` (fixed-axis roll about x, then pitch about y, then yaw about z).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    /// Builds a pose from a position and an `(x, y, z, w)` quaternion, checking the norm.
    pub fn from_parts(p: [f64; 3], q: [f64; 4]) -> Result<Self, PoseError> {
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        let raw = Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = raw.norm();
        if (norm - 1.0).abs() > QUAT_INPUT_TOLERANCE {
            return Err(PoseError::NotUnit(norm));
        }
        Ok(Self::new(Vector3::from(p), UnitQuaternion::from_quaternion(raw)))
    }

    /// Quaternion as `(x, y, z, w)`.
    pub fn quat_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Quaternion as `(x, y, z, w)` with `w >= 0`, so equal rotations give equal numbers.
    pub fn canonical_quat_xyzw(&self) -> [f64; 4] {
        let q = self.quat_xyzw();
        if q[3] < 0.0 {
            [-q[0], -q[1], -q[2], -q[3]]
        } else {
            q
        }
    }

    /// `self ∘ other`: express `other` (given in this frame) in the parent frame.
    pub fn compose(&self, other: &Pose6) -> Pose6 {
        Pose6 {
            position: self.position + self.orientation * other.position,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose6 {
        let inv = self.orientation.inverse();
        Pose6 {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn point(&self) -> Point3<f64> {
        Point3::from(self.position)
    }

    /// Unit z axis of this frame in the parent frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }
}

/// Rotation vector (axis * angle) of a unit quaternion, taking the short way round.
///
/// Uses `2 atan2(|v|, |w|)` so it stays accurate near the identity where
/// `acos(w)` loses precision.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let raw = q.quaternion();
    let (mut w, mut v) = (raw.w, raw.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < 1e-12 {
        // angle ≈ 2 s / w, so the vector is 2 v / w to first order
        return v * (2.0 / w);
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}

#[derive(Serialize, Deserialize)]
struct PoseWire {
    p: [f64; 3],
    q: [f64; 4],
}

impl Serialize for Pose6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseWire {
            p: self.position.into(),
            q: self.quat_xyzw(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose6 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = PoseWire::deserialize(d)?;
        Pose6::from_parts(w.p, w.q).map_err(serde::de::Error::custom)
    }
}
