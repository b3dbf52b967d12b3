//! The assisting robot: a 7-DoF arm on a fixed base, delta-joint actions,
//! rigid tools and a penalty-based contact force proxy.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{BodyPart, Capsule};
use crate::kinematics::JointChain;
use crate::pose::Pose6;

pub const ROBOT_DOF: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RobotProfileId {
    #[serde(rename = "armA")]
    ArmA,
    #[serde(rename = "armB")]
    ArmB,
}

impl RobotProfileId {
    pub const ALL: [RobotProfileId; 2] = [RobotProfileId::ArmA, RobotProfileId::ArmB];

    pub fn as_str(self) -> &'static str {
        match self {
            RobotProfileId::ArmA => "armA",
            RobotProfileId::ArmB => "armB",
        }
    }
}

impl fmt::Display for RobotProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RobotProfileId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "armA" | "arma" | "a" => Ok(RobotProfileId::ArmA),
            "armB" | "armb" | "b" => Ok(RobotProfileId::ArmB),
            _ => Err(format!("unknown robot profile '{s}' (expected armA or armB)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    Spoon,
    Cup,
    Scratcher,
    Wipe,
}

/// Per-step joint deltas in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f64; ROBOT_DOF]);

impl Action {
    pub fn zero() -> Self {
        Action([0.0; ROBOT_DOF])
    }

    pub fn clamped(&self, max_delta: f64) -> Self {
        Action(self.0.map(|d| d.clamp(-max_delta, max_delta)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotState {
    pub profile: RobotProfileId,
    pub tool: Tool,
    pub base: Pose6,
    /// Tool frame relative to the arm's end-effector flange.
    pub tool_offset: Pose6,
    pub q: [f64; ROBOT_DOF],
    /// Chain placed on `base`, ending at the flange.
    #[serde(skip)]
    pub chain: JointChain,
}

impl RobotState {
    /// Places `chain` on `base` and clamps `q` into its limits.
    pub fn new(
        profile: RobotProfileId,
        chain: &JointChain,
        base: Pose6,
        tool: Tool,
        tool_offset: Pose6,
        q: [f64; ROBOT_DOF],
    ) -> Self {
        let chain = chain.with_base(base);
        let mut q = q;
        chain.clamp(&mut q);
        Self { profile, tool, base, tool_offset, q, chain }
    }

    pub fn flange_pose(&self) -> Pose6 {
        self.chain
            .forward_kinematics(&self.q)
            .expect("robot q kept within limits")
            .end_effector
    }

    /// Flange pose composed with the tool offset.
    pub fn tool_pose(&self) -> Pose6 {
        self.flange_pose().compose(&self.tool_offset)
    }

    /// Origins of every joint frame followed by the tool frame.
    pub fn link_positions(&self) -> Vec<Vector3<f64>> {
        let fk = self.chain.forward_kinematics(&self.q).expect("robot q kept within limits");
        let mut out: Vec<_> = fk.links.iter().map(|p| p.position).collect();
        out.push(fk.end_effector.position);
        out.push(fk.end_effector.compose(&self.tool_offset).position);
        out
    }
}

/// `q' = clamp(q + clamp(a, ±max_delta), limits)`.
pub fn apply_action(state: &RobotState, action: &Action, max_delta: f64) -> RobotState {
    let a = action.clamped(max_delta);
    let mut next = state.clone();
    for (q, d) in next.q.iter_mut().zip(a.0) {
        *q += d;
    }
    next.chain.clamp(&mut next.q);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    /// Newtons.
    pub magnitude: f64,
    /// Deepest penetrated body part and the contact point, if any.
    pub part: Option<BodyPart>,
    pub location: Option<[f64; 3]>,
}

impl ContactForce {
    pub const NONE: ContactForce = ContactForce { magnitude: 0.0, part: None, location: None };
}

/// Linear penalty force `k · d` where `d` is the deepest penetration of the
/// tool reference point into any human capsule.
pub fn contact_force(tool_point: &Vector3<f64>, capsules: &[Capsule], stiffness: f64) -> ContactForce {
    let mut best = ContactForce::NONE;
    let mut depth = 0.0;
    for c in capsules {
        let d = c.penetration(tool_point);
        if d > depth {
            depth = d;
            best = ContactForce {
                magnitude: stiffness * d,
                part: Some(c.part),
                location: Some([tool_point.x, tool_point.y, tool_point.z]),
            };
        }
    }
    best
}
