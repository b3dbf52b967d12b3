//! WebSocket message schema. Every message is a JSON object with a `type`
//! tag and the session id `sid`.
//!
//! Client to server:
//! - `hello {version}`: opens the session; answered with `config`.
//! - `start {task, robot, policy, practice}`: begins a practice run or the trial.
//! - `pose {t, head, left, right}`: tracked poses as `{p: [x, y, z], q: [x, y, z, w]}`
//!   with strictly increasing `t` (seconds).
//! - `questionnaire {L1, L2, L3, L4}`: 7-point responses after the trial.
//! - `stop`: aborts any running episode and ends the session.
//!
//! Server to client: `config`, `state` (one per simulation tick), `result`
//! (once per finished episode) and `error`.

use assistlab_core::avatar::{HumanState, HUMAN_DOF};
use assistlab_core::envs::{ParticleStatus, Task};
use assistlab_core::robot::{RobotProfileId, ROBOT_DOF};
use assistlab_core::Pose6;
use assistlab_eval::PolicyMode;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        sid: String,
        version: u32,
    },
    Start {
        sid: String,
        task: Task,
        robot: RobotProfileId,
        policy: String,
        #[serde(default)]
        practice: bool,
    },
    Pose {
        sid: String,
        t: f64,
        head: Pose6,
        left: Pose6,
        right: Pose6,
    },
    Questionnaire {
        sid: String,
        #[serde(rename = "L1")]
        l1: u8,
        #[serde(rename = "L2")]
        l2: u8,
        #[serde(rename = "L3")]
        l3: u8,
        #[serde(rename = "L4")]
        l4: u8,
    },
    Stop {
        sid: String,
    },
}

impl ClientMessage {
    pub fn sid(&self) -> &str {
        match self {
            ClientMessage::Hello { sid, .. }
            | ClientMessage::Start { sid, .. }
            | ClientMessage::Pose { sid, .. }
            | ClientMessage::Questionnaire { sid, .. }
            | ClientMessage::Stop { sid } => sid,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::Start { .. } => "start",
            ClientMessage::Pose { .. } => "pose",
            ClientMessage::Questionnaire { .. } => "questionnaire",
            ClientMessage::Stop { .. } => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    Practice,
    Trial,
    Questionnaire,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub id: String,
    pub task: Task,
    pub robot: RobotProfileId,
    pub mode: PolicyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarDefault {
    pub task: Task,
    pub human: HumanState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleView {
    pub p: [f64; 3],
    pub status: ParticleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Config {
        sid: String,
        version: u32,
        tasks: Vec<Task>,
        robots: Vec<RobotProfileId>,
        policies: Vec<PolicyInfo>,
        steps: u32,
        tick_ms: u64,
        avatars: Vec<AvatarDefault>,
    },
    State {
        sid: String,
        phase: Phase,
        t: u32,
        human: [f64; HUMAN_DOF],
        robot: [f64; ROBOT_DOF],
        tool: Pose6,
        particles: Vec<ParticleView>,
        markers: Vec<bool>,
        reward: f64,
        cumulative: f64,
        force: f64,
    },
    Result {
        sid: String,
        trial: u64,
        practice: bool,
        success: bool,
        cumulative: f64,
        steps: u32,
    },
    Error {
        sid: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::Config { .. } => "config",
            ServerMessage::State { .. } => "state",
            ServerMessage::Result { .. } => "result",
            ServerMessage::Error { .. } => "error",
        }
    }
}
