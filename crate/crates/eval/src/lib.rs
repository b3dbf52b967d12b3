//! Batch evaluation, JSONL episode records with replay verification, result
//! tables and the Wilcoxon signed-rank test.

pub mod evaluate;
pub mod questionnaire;
pub mod record;
pub mod replay;
pub mod stats;
pub mod table;

pub use evaluate::{aggregate, evaluate, run_episode, EvalSpec, MetricsRow, Policy, PolicyMode, ZeroPolicy};
pub use questionnaire::QuestionnaireRecord;
pub use record::{read_records, write_records, EpisodeRecord, RecordFooter, RecordHeader, StepRow};
pub use replay::{replay, Divergence, PolicyCheck, ReplayReport};
pub use stats::{wilcoxon_signed_rank, wilcoxon_vs_constant, wilcoxon_with, Alternative, Method, WilcoxonResult};
pub use table::{make_table, Layout, Table};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("policy observes {policy} values but task {task} provides {task_dim}")]
    ObsDimMismatch { policy: usize, task: String, task_dim: usize },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("record config hash {recorded} does not match installed {installed}")]
    ConfigHashMismatch { recorded: String, installed: String },
    #[error("missing table cells: {}", .0.join(", "))]
    MissingCell(Vec<String>),
    #[error("duplicate table cell: {0}")]
    DuplicateCell(String),
    #[error("invalid questionnaire: {0}")]
    InvalidResponse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("environment: {0}")]
    Env(#[from] assistlab_core::envs::EnvError),
    #[error("policy: {0}")]
    Learn(#[from] assistlab_learn::LearnError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl EvalError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
