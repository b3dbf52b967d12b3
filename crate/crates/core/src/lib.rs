//! Simulation core for human-in-the-loop assistive robotics: kinematic
//! chains, the retargeted human avatar, the assisting robot arm and the four
//! assistive task environments.

pub mod avatar;
pub mod config;
pub mod envs;
pub mod geometry;
pub mod kinematics;
pub mod pose;
pub mod robot;
pub mod seeding;

pub use kinematics::{ik_dls, IkParams, IkSolution, JointChain, KinematicsError, Link};
pub use pose::Pose6;
