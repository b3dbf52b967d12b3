//! Gaussian MLP policies, GAE and a from-scratch PPO trainer.

pub mod gae;
pub mod net;
pub mod ppo;
pub mod train;

pub use gae::gae;
pub use net::{policy_forward, Mlp, PolicyNet, PolicyOutput, RunningNorm};
pub use ppo::{ppo_update, Adam, LossGrad, LossStats, RolloutBatch};
pub use train::{train, CurvePoint, TrainConfig, TrainOutcome};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, minibatch {minibatch}: {stats}")]
    NonFiniteLoss { epoch: usize, minibatch: usize, stats: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid policy file: {0}")]
    InvalidPolicy(String),
    #[error("environment: {0}")]
    Env(#[from] assistlab_core::envs::EnvError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("policy json: {0}")]
    Json(#[from] serde_json::Error),
}
