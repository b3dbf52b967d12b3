//! Live session host: a WebSocket endpoint that retargets streamed poses
//! onto the avatar and steps the environment with a loaded policy on a fixed
//! simulation clock.

pub mod protocol;
pub mod registry;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Phase, ServerMessage, PROTOCOL_VERSION};
pub use registry::PolicyRegistry;
pub use server::{router, serve, AppState, ServerConfig};
pub use session::{Session, SessionOutput};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("session {0} has finished")]
    SessionExpired(String),
    #[error("policy: {0}")]
    Learn(#[from] assistlab_learn::LearnError),
    #[error("environment: {0}")]
    Env(#[from] assistlab_core::envs::EnvError),
    #[error("records: {0}")]
    Eval(#[from] assistlab_eval::EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
