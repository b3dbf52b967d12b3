#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use assistlab_core::avatar::{Anthropometrics, BiomechMode, Sex, Side};
use assistlab_core::config::LabConfig;
use assistlab_core::envs::{initial_human, Task};
use assistlab_core::robot::RobotProfileId;
use assistlab_core::seeding::rng_from_seed;
use assistlab_core::Pose6;
use assistlab_learn::PolicyNet;
use assistlab_server::{ClientMessage, PolicyRegistry, ServerMessage, Session};

pub fn lab() -> Arc<LabConfig> {
    static LAB: OnceLock<Arc<LabConfig>> = OnceLock::new();
    LAB.get_or_init(|| Arc::new(LabConfig::shipped())).clone()
}

pub fn net(task: Task, robot: RobotProfileId, seed: u64) -> PolicyNet {
    let mut rng = rng_from_seed(seed);
    PolicyNet::init(task, robot, BiomechMode::Fixed, &[16, 16], -0.5, lab().env.robot.max_delta, &mut rng)
}

pub fn registry() -> Arc<PolicyRegistry> {
    let mut reg = PolicyRegistry::new();
    reg.insert("feed-a", net(Task::Feeding, RobotProfileId::ArmA, 1));
    reg.insert("scratch-b", net(Task::Scratching, RobotProfileId::ArmB, 2));
    Arc::new(reg)
}

pub fn session(seed: u64) -> Session {
    Session::new("s1", seed, 100, lab(), registry())
}

pub fn hello() -> ClientMessage {
    ClientMessage::Hello { sid: "s1".into(), version: assistlab_server::PROTOCOL_VERSION }
}

pub fn start(task: Task, robot: RobotProfileId, policy: &str, practice: bool) -> ClientMessage {
    ClientMessage::Start { sid: "s1".into(), task, robot, policy: policy.into(), practice }
}

/// A person sitting at the feeding station who sways slightly and moves
/// the right hand, as tracked poses at time `t`.
pub fn pose(task: Task, t: f64) -> ClientMessage {
    let human = initial_human(&lab(), task, Anthropometrics::default_for(Sex::Male), [0.0; 3]);
    let mut head = human.head_frame();
    head.position.x += 0.03 * (0.7 * t).sin();
    head.position.y += 0.02 * (0.4 * t).sin();
    let turn = Pose6::from_xyz_rpy([0.0; 3], [0.0, 0.1 * (0.3 * t).sin(), 0.2 * (0.5 * t).sin()]);
    head.orientation *= turn.orientation;
    let mut right = human.hand_pose(Side::Right);
    right.position.z += 0.05 * (0.9 * t).sin();
    ClientMessage::Pose { sid: "s1".into(), t, head, left: human.hand_pose(Side::Left), right }
}

pub fn count(msgs: &[ServerMessage], kind: &str) -> usize {
    msgs.iter().filter(|m| m.kind() == kind).count()
}

pub fn errors(msgs: &[ServerMessage]) -> Vec<String> {
    msgs.iter()
        .filter_map(|m| match m {
            ServerMessage::Error { message, .. } => Some(message.clone()),
            _ => None,
        })
        .collect()
}
