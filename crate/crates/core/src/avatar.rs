//! The simulated human: anthropometrics, a 20-joint kinematic body, capsule
//! geometry, retargeting from headset/controller poses, and the biomechanics
//! sampler used to build training populations.
//!
//! Conventions: z up, the person faces +x in the furniture frame. The waist
//! frame sits at the fixed waist center `W` and the torso points along +z of
//! that frame. Waist joints are applied as `Rx(-roll) · Ry(pitch) · Rz(yaw)`
//! so that a torso of length `‖ψ‖` posed with the angles from
//! [`align_waist`] puts the head center at `W + ψ` (for `ψ_z > 0`).

use std::io::BufRead;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{BodyPart, Capsule};
use crate::kinematics::{ik_dls, FkResult, IkParams, JointChain, Link};
use crate::pose::Pose6;

pub const HUMAN_DOF: usize = 20;
pub const ARM_DOF: usize = 7;

/// Head sphere radius (m).
pub const HEAD_RADIUS: f64 = 0.09;
/// Mouth point, forward of the head center in the head frame (m).
pub const MOUTH_OFFSET: f64 = 0.08;

/// Share of the head-minus-waist yaw kept by the head; the rest goes to the waist.
pub const HEAD_YAW_SHARE: f64 = 0.7;

pub const MIN_TORSO_HEIGHT: f64 = 0.40;
pub const MAX_TORSO_HEIGHT: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AvatarError {
    #[error("headset height must be positive (got {0})")]
    NonPositiveHeight(f64),
    #[error("waist-to-head vector is degenerate (|ψ| = {0} m)")]
    DegenerateVector(f64),
    #[error("invalid anthropometrics: {0}")]
    InvalidBody(String),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiomechMode {
    /// 50th-percentile body, upright waist.
    Fixed,
    /// Uniform torso height and initial waist angles.
    Randomized,
}

impl std::str::FromStr for BiomechMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "randomized" => Ok(Self::Randomized),
            _ => Err(format!("unknown biomech mode '{s}' (fixed|randomized)")),
        }
    }
}

impl std::fmt::Display for BiomechMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Randomized => "randomized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyRadii {
    pub torso: f64,
    pub head: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anthropometrics {
    pub sex: Sex,
    /// Hipbone (waist center) to head center, meters.
    pub torso_height: f64,
    /// Head center down to the shoulder line.
    pub shoulder_drop: f64,
    pub shoulder_half_width: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    /// Wrist to finger tip.
    pub hand: f64,
    pub radii: BodyRadii,
    /// Product of all height scales applied to the default body.
    pub height_scale: f64,
}

impl Anthropometrics {
    /// 50th-percentile-like defaults. Torso heights are the midpoints of the
    /// randomized ranges.
    pub fn default_for(sex: Sex) -> Self {
        match sex {
            Sex::Male => Self {
                sex,
                torso_height: 0.60,
                shoulder_drop: 0.16,
                shoulder_half_width: 0.19,
                upper_arm: 0.30,
                forearm: 0.26,
                hand: 0.18,
                radii: BodyRadii { torso: 0.14, head: HEAD_RADIUS, upper_arm: 0.05, forearm: 0.04, hand: 0.035 },
                height_scale: 1.0,
            },
            Sex::Female => Self {
                sex,
                torso_height: 0.54,
                shoulder_drop: 0.15,
                shoulder_half_width: 0.17,
                upper_arm: 0.28,
                forearm: 0.24,
                hand: 0.17,
                radii: BodyRadii { torso: 0.12, head: HEAD_RADIUS, upper_arm: 0.045, forearm: 0.035, hand: 0.03 },
                height_scale: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), AvatarError> {
        if !(MIN_TORSO_HEIGHT..=MAX_TORSO_HEIGHT).contains(&self.torso_height) {
            return Err(AvatarError::InvalidBody(format!(
                "torso height {} outside [{MIN_TORSO_HEIGHT}, {MAX_TORSO_HEIGHT}]",
                self.torso_height
            )));
        }
        let r = &self.radii;
        let all = [
            self.shoulder_drop,
            self.shoulder_half_width,
            self.upper_arm,
            self.forearm,
            self.hand,
            r.torso,
            r.head,
            r.upper_arm,
            r.forearm,
            r.hand,
            self.height_scale,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(AvatarError::InvalidBody("lengths and radii must be positive".into()));
        }
        if self.shoulder_drop >= self.torso_height {
            return Err(AvatarError::InvalidBody("shoulders above head".into()));
        }
        Ok(())
    }

    /// Multiplies every segment length by `scale`; radii are unchanged.
    pub fn scaled(&self, scale: f64) -> Result<Self, AvatarError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(AvatarError::InvalidBody(format!("scale {scale}")));
        }
        let out = Self {
            torso_height: self.torso_height * scale,
            shoulder_drop: self.shoulder_drop * scale,
            shoulder_half_width: self.shoulder_half_width * scale,
            upper_arm: self.upper_arm * scale,
            forearm: self.forearm * scale,
            hand: self.hand * scale,
            height_scale: self.height_scale * scale,
            ..*self
        };
        out.validate()?;
        Ok(out)
    }

    /// Same body with a different torso height; the shoulder drop below the head is kept.
    pub fn with_torso_height(&self, torso_height: f64) -> Result<Self, AvatarError> {
        let out = Self { torso_height, ..*self };
        out.validate()?;
        Ok(out)
    }
}

/// `scale = headset_z / default_head_height`.
pub fn estimate_height_scale(headset: &Vector3<f64>, default_head_height: f64) -> Result<f64, AvatarError> {
    if !(headset.z > 0.0) {
        return Err(AvatarError::NonPositiveHeight(headset.z));
    }
    if !(default_head_height > 0.0) {
        return Err(AvatarError::NonPositiveHeight(default_head_height));
    }
    Ok(headset.z / default_head_height)
}

/// `atan2` with `atan2(0, 0) := 0`.
pub fn atan2_or_zero(y: f64, x: f64) -> f64 {
    if y == 0.0 && x == 0.0 {
        0.0
    } else {
        y.atan2(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaistAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Waist roll/pitch/yaw from the headset position `chi` and waist center `w`:
///
/// ```text
/// ψ = χ − W
/// r = atan2(ψy, ψz)
/// p = atan2(ψx·cos r, ψz)
/// y = atan2(cos r, sin r · sin p)
/// ```
///
/// `cos r`, `sin r` and `sin p` are taken from the atan2 arguments directly
/// (`cos atan2(a, b) = b / hypot(a, b)`), which is the same function but
/// returns exact zeros on the axes, so `ψ = (0, 1, 0)` gives `(π/2, 0, 0)`.
pub fn align_waist(chi: &Vector3<f64>, w: &Vector3<f64>) -> Result<WaistAngles, AvatarError> {
    let psi = chi - w;
    let len = psi.norm();
    if !(len >= 1e-3) {
        return Err(AvatarError::DegenerateVector(len));
    }
    let (cos_r, sin_r) = unit_of(psi.z, psi.y);
    let roll = atan2_or_zero(psi.y, psi.z);
    let px = psi.x * cos_r;
    let pitch = atan2_or_zero(px, psi.z);
    let (_, sin_p) = unit_of(psi.z, px);
    let yaw = atan2_or_zero(cos_r, sin_r * sin_p);
    Ok(WaistAngles { roll, pitch, yaw })
}

/// `(cos θ, sin θ)` for `θ = atan2(y, x)`, with `(1, 0)` at the origin.
fn unit_of(x: f64, y: f64) -> (f64, f64) {
    let h = x.hypot(y);
    if h == 0.0 {
        (1.0, 0.0)
    } else {
        (x / h, y / h)
    }
}

/// Head roll and pitch taken directly from the headset orientation, clamped
/// to the model limits. Returns `(roll, pitch, clamped)`.
pub fn align_head(theta: [f64; 3]) -> (f64, f64, bool) {
    let limits = HumanState::joint_limits();
    let (lo_r, hi_r) = limits[3];
    let (lo_p, hi_p) = limits[4];
    let roll = theta[0].clamp(lo_r, hi_r);
    let pitch = theta[1].clamp(lo_p, hi_p);
    let clamped = roll != theta[0] || pitch != theta[1];
    (roll, pitch, clamped)
}

/// Splits `θy − yψ` into `(head yaw, waist yaw)` at 0.7 / 0.3.
///
/// The waist share is computed as the remainder so the two parts add back
/// to the difference exactly.
pub fn split_yaw(theta_yaw: f64, waist_yaw: f64) -> (f64, f64) {
    let d = theta_yaw - waist_yaw;
    let head = HEAD_YAW_SHARE * d;
    (head, d - head)
}

/// Which stretch of the arm a surface point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSegment {
    Upper,
    Fore,
}

/// A point on an arm surface, attached to the arm so it follows the pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSurfacePoint {
    pub side: Side,
    pub segment: ArmSegment,
    /// Distance from the proximal joint along the segment axis (m).
    pub axial: f64,
    /// Angle around the segment axis measured from the link +x (anterior) direction.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedInput {
    pub t: f64,
    pub head: Pose6,
    pub left: Pose6,
    pub right: Pose6,
}

/// Loads a JSON Lines trace, checking strictly increasing timestamps.
/// Quaternion norms are checked on deserialization.
pub fn load_trace<R: BufRead>(reader: R) -> Result<Vec<TrackedInput>, AvatarError> {
    let mut out: Vec<TrackedInput> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| AvatarError::Trace { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: TrackedInput = serde_json::from_str(&line)
            .map_err(|e| AvatarError::Trace { line: i + 1, message: e.to_string() })?;
        if let Some(prev) = out.last() {
            if !(frame.t > prev.t) {
                return Err(AvatarError::Trace {
                    line: i + 1,
                    message: format!("timestamp {} does not follow {}", frame.t, prev.t),
                });
            }
        }
        out.push(frame);
    }
    Ok(out)
}

/// Full avatar configuration. Joint order for [`HumanState::joints`]:
/// waist (roll, pitch, yaw), head (roll, pitch, yaw), right arm q[7], left arm q[7].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub body: Anthropometrics,
    /// Waist frame in the world; its position is the waist center `W`.
    pub furniture: Pose6,
    pub waist: [f64; 3],
    pub head: [f64; 3],
    pub right_arm: [f64; ARM_DOF],
    pub left_arm: [f64; ARM_DOF],
}

const RIGHT_ARM_LIMITS: [(f64, f64); ARM_DOF] = [
    (-3.0, 1.0),  // shoulder flexion (−: forward)
    (-2.8, 0.35), // shoulder abduction (−: outward)
    (-1.4, 1.4),  // humeral rotation
    (-2.6, 0.0),  // elbow flexion
    (-1.5, 1.5),  // forearm pronation
    (-1.2, 1.2),  // wrist flexion
    (-0.6, 0.3),  // wrist deviation
];

fn arm_limits(side: Side) -> [(f64, f64); ARM_DOF] {
    match side {
        Side::Right => RIGHT_ARM_LIMITS,
        // mirror through the sagittal plane: joints about x and z flip sign
        Side::Left => {
            let mut l = RIGHT_ARM_LIMITS;
            for i in [1, 2, 4, 6] {
                l[i] = (-RIGHT_ARM_LIMITS[i].1, -RIGHT_ARM_LIMITS[i].0);
            }
            l
        }
    }
}

fn arm_axes() -> [Unit<Vector3<f64>>; ARM_DOF] {
    [
        Vector3::y_axis(),
        Vector3::x_axis(),
        Vector3::z_axis(),
        Vector3::y_axis(),
        Vector3::z_axis(),
        Vector3::y_axis(),
        Vector3::x_axis(),
    ]
}

/// Mirror a right-arm configuration onto the left arm.
pub fn mirror_arm(q: &[f64; ARM_DOF]) -> [f64; ARM_DOF] {
    let mut out = *q;
    for i in [1, 2, 4, 6] {
        out[i] = -q[i];
    }
    out
}

impl HumanState {
    pub fn joint_limits() -> [(f64, f64); HUMAN_DOF] {
        let mut l = [(0.0, 0.0); HUMAN_DOF];
        // waist
        l[0] = (-0.6, 0.6);
        l[1] = (-0.5, 1.0);
        l[2] = (-1.0, 1.0);
        // head
        l[3] = (-0.6, 0.6);
        l[4] = (-0.8, 0.8);
        l[5] = (-1.4, 1.4);
        l[6..13].copy_from_slice(&arm_limits(Side::Right));
        l[13..20].copy_from_slice(&arm_limits(Side::Left));
        l
    }

    /// Relaxed seated arm pose: upper arm down, forearm forward.
    pub fn resting_arm(side: Side) -> [f64; ARM_DOF] {
        let right = [-0.15, -0.15, 0.0, -1.45, 0.0, 0.0, 0.0];
        match side {
            Side::Right => right,
            Side::Left => mirror_arm(&right),
        }
    }

    pub fn new(body: Anthropometrics, furniture: Pose6, waist: [f64; 3]) -> Self {
        Self {
            body,
            furniture,
            waist,
            head: [0.0; 3],
            right_arm: Self::resting_arm(Side::Right),
            left_arm: Self::resting_arm(Side::Left),
        }
    }

    pub fn waist_center(&self) -> Vector3<f64> {
        self.furniture.position
    }

    pub fn joints(&self) -> [f64; HUMAN_DOF] {
        let mut j = [0.0; HUMAN_DOF];
        j[0..3].copy_from_slice(&self.waist);
        j[3..6].copy_from_slice(&self.head);
        j[6..13].copy_from_slice(&self.right_arm);
        j[13..20].copy_from_slice(&self.left_arm);
        j
    }

    pub fn set_joints(&mut self, j: &[f64; HUMAN_DOF]) {
        self.waist.copy_from_slice(&j[0..3]);
        self.head.copy_from_slice(&j[3..6]);
        self.right_arm.copy_from_slice(&j[6..13]);
        self.left_arm.copy_from_slice(&j[13..20]);
    }

    /// Clamps every joint into its limits; returns whether anything moved.
    pub fn clamp_to_limits(&mut self) -> bool {
        let mut j = self.joints();
        let mut changed = false;
        for (v, (lo, hi)) in j.iter_mut().zip(Self::joint_limits()) {
            let c = v.clamp(lo, hi);
            changed |= c != *v;
            *v = c;
        }
        self.set_joints(&j);
        changed
    }

    pub fn within_limits(&self) -> bool {
        self.joints()
            .iter()
            .zip(Self::joint_limits())
            .all(|(v, (lo, hi))| *v >= lo && *v <= hi)
    }

    pub fn arm(&self, side: Side) -> &[f64; ARM_DOF] {
        match side {
            Side::Right => &self.right_arm,
            Side::Left => &self.left_arm,
        }
    }

    pub fn arm_mut(&mut self, side: Side) -> &mut [f64; ARM_DOF] {
        match side {
            Side::Right => &mut self.right_arm,
            Side::Left => &mut self.left_arm,
        }
    }

    /// Waist rotation `Rx(−roll) · Ry(pitch) · Rz(yaw)`.
    pub fn waist_rotation(waist: &[f64; 3]) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&-Vector3::x_axis(), waist[0])
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), waist[1])
            * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), waist[2])
    }

    /// Torso frame at the waist center, z along the spine.
    pub fn torso_frame(&self) -> Pose6 {
        self.furniture
            .compose(&Pose6::new(Vector3::zeros(), Self::waist_rotation(&self.waist)))
    }

    pub fn head_frame(&self) -> Pose6 {
        let h = self.head;
        let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), h[0])
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), h[1])
            * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), h[2]);
        self.torso_frame()
            .compose(&Pose6::new(Vector3::new(0.0, 0.0, self.body.torso_height), rot))
    }

    pub fn head_center(&self) -> Vector3<f64> {
        self.torso_frame()
            .transform_point(&Vector3::new(0.0, 0.0, self.body.torso_height))
    }

    pub fn mouth(&self) -> Vector3<f64> {
        self.head_frame().transform_point(&Vector3::new(MOUTH_OFFSET, 0.0, 0.0))
    }

    fn shoulder_local(&self, side: Side) -> Vector3<f64> {
        let y = match side {
            Side::Right => -self.body.shoulder_half_width,
            Side::Left => self.body.shoulder_half_width,
        };
        Vector3::new(0.0, y, self.body.torso_height - self.body.shoulder_drop)
    }

    /// Shoulder-rooted 7-DoF arm chain; the end effector is the palm center.
    pub fn arm_chain(&self, side: Side) -> JointChain {
        let b = &self.body;
        let base = self
            .torso_frame()
            .compose(&Pose6::new(self.shoulder_local(side), UnitQuaternion::identity()));
        let offsets = [
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, -b.upper_arm),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, -b.forearm),
            Vector3::zeros(),
        ];
        let links = offsets
            .iter()
            .zip(arm_axes())
            .zip(arm_limits(side))
            .map(|((o, axis), limits)| Link {
                offset: Pose6::new(*o, UnitQuaternion::identity()),
                axis,
                limits,
            })
            .collect();
        JointChain::new(base, links, Pose6::from_translation(0.0, 0.0, -b.hand * 0.5))
            .expect("arm chain is well formed")
    }

    /// Arm forward kinematics at the current (clamped) configuration.
    pub fn arm_fk(&self, side: Side) -> FkResult {
        let chain = self.arm_chain(side);
        let mut q = *self.arm(side);
        chain.clamp(&mut q);
        chain.forward_kinematics(&q).expect("clamped arm configuration")
    }

    pub fn hand_pose(&self, side: Side) -> Pose6 {
        self.arm_fk(side).end_effector
    }

    /// `(shoulder, elbow, wrist, finger tip)` positions.
    pub fn arm_points(&self, side: Side) -> [Vector3<f64>; 4] {
        let fk = self.arm_fk(side);
        let tip = fk.links[6].transform_point(&Vector3::new(0.0, 0.0, -self.body.hand));
        [fk.links[0].position, fk.links[3].position, fk.links[5].position, tip]
    }

    /// World position and outward normal of a point on the arm surface.
    pub fn surface_point(&self, p: &ArmSurfacePoint) -> (Vector3<f64>, Vector3<f64>) {
        let fk = self.arm_fk(p.side);
        let (frame, radius) = match p.segment {
            ArmSegment::Upper => (fk.links[2], self.body.radii.upper_arm),
            ArmSegment::Fore => (fk.links[4], self.body.radii.forearm),
        };
        let dir = Vector3::new(p.angle.cos(), p.angle.sin(), 0.0);
        let local = dir * radius + Vector3::new(0.0, 0.0, -p.axial);
        (frame.transform_point(&local), frame.transform_vector(&dir))
    }

    pub fn segment_length(&self, segment: ArmSegment) -> f64 {
        match segment {
            ArmSegment::Upper => self.body.upper_arm,
            ArmSegment::Fore => self.body.forearm,
        }
    }

    pub fn capsules(&self) -> Vec<Capsule> {
        let r = self.body.radii;
        let torso = self.torso_frame();
        let mut out = vec![
            Capsule {
                part: BodyPart::Torso,
                a: torso.position,
                b: torso.transform_point(&Vector3::new(
                    0.0,
                    0.0,
                    self.body.torso_height - self.body.shoulder_drop,
                )),
                radius: r.torso,
            },
            Capsule::sphere(BodyPart::Head, self.head_center(), r.head),
        ];
        for side in [Side::Right, Side::Left] {
            let [s, e, w, t] = self.arm_points(side);
            let parts = match side {
                Side::Right => [BodyPart::RightUpperArm, BodyPart::RightForearm, BodyPart::RightHand],
                Side::Left => [BodyPart::LeftUpperArm, BodyPart::LeftForearm, BodyPart::LeftHand],
            };
            out.push(Capsule { part: parts[0], a: s, b: e, radius: r.upper_arm });
            out.push(Capsule { part: parts[1], a: e, b: w, radius: r.forearm });
            out.push(Capsule { part: parts[2], a: w, b: t, radius: r.hand });
        }
        out
    }
}

/// Per-frame retargeting quality flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetargetFlags {
    pub head_clamped: bool,
    pub waist_clamped: bool,
    pub waist_degenerate: bool,
    pub right_unreached: bool,
    pub left_unreached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmRetarget {
    pub q: [f64; ARM_DOF],
    pub reached: bool,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

/// IK for one avatar arm, warm-started from `previous`. Never fails: an
/// unreachable hand pose returns the best in-limit configuration with
/// `reached = false`.
pub fn retarget_arm(
    state: &HumanState,
    hand: &Pose6,
    side: Side,
    previous: &[f64; ARM_DOF],
    params: &IkParams,
) -> ArmRetarget {
    let chain = state.arm_chain(side);
    let mut seed = *previous;
    chain.clamp(&mut seed);
    let sol = ik_dls(&chain, &seed, hand, params).expect("seed clamped to limits");
    let mut q = [0.0; ARM_DOF];
    q.copy_from_slice(&sol.q);
    ArmRetarget {
        q,
        reached: sol.converged,
        position_residual: sol.position_residual,
        orientation_residual: sol.orientation_residual,
    }
}

/// Head roll, pitch, yaw of a world orientation expressed in the furniture frame.
pub fn headset_angles(furniture: &Pose6, head: &UnitQuaternion<f64>) -> [f64; 3] {
    let (r, p, y) = (furniture.orientation.inverse() * head).euler_angles();
    [r, p, y]
}

/// One retargeting frame: waist from the head position, head from the
/// headset orientation with the yaw split, both arms by IK.
pub fn retarget_frame(
    state: &HumanState,
    input: &TrackedInput,
    params: &IkParams,
) -> (HumanState, RetargetFlags) {
    let mut next = *state;
    let mut flags = RetargetFlags::default();
    let limits = HumanState::joint_limits();

    // work in the furniture frame so the lying pose uses the same formulas
    let inv = state.furniture.inverse();
    let chi_local = inv.transform_point(&input.head.position);
    let theta = headset_angles(&state.furniture, &input.head.orientation);

    let waist_yaw_ref = match align_waist(&chi_local, &Vector3::zeros()) {
        Ok(w) => {
            next.waist[0] = w.roll;
            next.waist[1] = w.pitch;
            w.yaw
        }
        Err(_) => {
            flags.waist_degenerate = true;
            // keep the previous lean; the yaw reference of an upright torso
            std::f64::consts::FRAC_PI_2
        }
    };
    let (head_roll, head_pitch, head_clamped) = align_head(theta);
    let (head_yaw, waist_yaw) = split_yaw(theta[2], waist_yaw_ref);
    next.head = [head_roll, head_pitch, head_yaw];
    next.waist[2] = waist_yaw;

    for i in 0..3 {
        let (lo, hi) = limits[i];
        let c = next.waist[i].clamp(lo, hi);
        flags.waist_clamped |= c != next.waist[i];
        next.waist[i] = c;
    }
    let (lo, hi) = limits[5];
    let c = next.head[2].clamp(lo, hi);
    flags.head_clamped = head_clamped || c != next.head[2];
    next.head[2] = c;

    for (side, hand) in [(Side::Right, &input.right), (Side::Left, &input.left)] {
        let prev = *state.arm(side);
        let r = retarget_arm(&next, hand, side, &prev, params);
        *next.arm_mut(side) = r.q;
        match side {
            Side::Right => flags.right_unreached = !r.reached,
            Side::Left => flags.left_unreached = !r.reached,
        }
    }
    debug_assert!(next.within_limits());
    (next, flags)
}

pub const RANDOM_WAIST_RANGE: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Torso-height range for the randomized population.
pub fn torso_height_range(sex: Sex) -> (f64, f64) {
    match sex {
        Sex::Male => (0.50, 0.70),
        Sex::Female => (0.44, 0.64),
    }
}

/// Draws a body and initial waist angles. `Fixed` returns the default body
/// with an upright waist and consumes no randomness.
pub fn sample_biomechanics<R: Rng + ?Sized>(
    rng: &mut R,
    sex: Sex,
    mode: BiomechMode,
) -> (Anthropometrics, [f64; 3]) {
    let base = Anthropometrics::default_for(sex);
    match mode {
        BiomechMode::Fixed => (base, [0.0; 3]),
        BiomechMode::Randomized => {
            let (lo, hi) = torso_height_range(sex);
            let torso = rng.random_range(lo..hi);
            let mut waist = [0.0; 3];
            for w in &mut waist {
                *w = rng.random_range(-RANDOM_WAIST_RANGE..RANDOM_WAIST_RANGE);
            }
            let body = base.with_torso_height(torso).expect("range inside torso bounds");
            (body, waist)
        }
    }
}
