//! Episode records as JSON lines: one header, one row per step, one footer.

use std::io::{BufRead, Write};

use assistlab_core::avatar::{BiomechMode, HUMAN_DOF};
use assistlab_core::envs::{HumanSource, StepEvents, Task};
use assistlab_core::robot::{RobotProfileId, ROBOT_DOF};
use assistlab_core::seeding::derive_seed;
use serde::{Deserialize, Serialize};

use crate::evaluate::PolicyMode;
use crate::EvalError;

pub const RECORD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format_version: u32,
    pub config_hash: String,
    /// The episode seed is derived from `(base_seed, episode)`.
    pub base_seed: u64,
    pub episode: u64,
    pub task: Task,
    pub robot: RobotProfileId,
    pub policy_id: String,
    pub policy_mode: PolicyMode,
    pub biomech: BiomechMode,
    pub human_source: HumanSource,
}

impl RecordHeader {
    pub fn episode_seed(&self) -> u64 {
        episode_seed(self.base_seed, self.episode)
    }
}

pub fn episode_seed(base: u64, episode: u64) -> u64 {
    derive_seed(base, &[episode])
}

/// One environment step: the observation the policy saw, the action it
/// chose, and what the step produced. Live episodes also carry the human
/// joints applied before the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: u32,
    pub obs: Vec<f64>,
    pub action: [f64; ROBOT_DOF],
    pub reward: f64,
    pub force: f64,
    pub events: StepEvents,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<[f64; HUMAN_DOF]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFooter {
    pub cumulative_reward: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub header: RecordHeader,
    pub rows: Vec<StepRow>,
    pub footer: RecordFooter,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(RecordHeader),
    Step(StepRow),
    Footer(RecordFooter),
}

impl EpisodeRecord {
    /// Structural checks plus the footer sum.
    pub fn validate(&self, steps: u32) -> Result<(), EvalError> {
        self.validate_structure(steps)?;
        let sum: f64 = self.rows.iter().map(|r| r.reward).sum();
        if (sum - self.footer.cumulative_reward).abs() > 1e-9 {
            return Err(EvalError::Schema {
                line: 0,
                message: format!("footer reward {} but rows sum to {sum}", self.footer.cumulative_reward),
            });
        }
        Ok(())
    }

    /// Row count, step indices, observation lengths and human joints.
    pub fn validate_structure(&self, steps: u32) -> Result<(), EvalError> {
        let schema = |message: String| Err(EvalError::Schema { line: 0, message });
        if self.header.format_version != RECORD_FORMAT_VERSION {
            return schema(format!("format version {}", self.header.format_version));
        }
        if self.rows.len() != steps as usize {
            return schema(format!("{} rows, expected {steps}", self.rows.len()));
        }
        let dim = self.header.task.obs_dim();
        for (i, row) in self.rows.iter().enumerate() {
            if row.t as usize != i {
                return schema(format!("row {i} has t = {}", row.t));
            }
            if row.obs.len() != dim {
                return schema(format!("row {i} observation has {} values, expected {dim}", row.obs.len()));
            }
            if (self.header.human_source == HumanSource::Live) != row.human.is_some() {
                return schema(format!("row {i} human joints do not match the human source"));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), EvalError> {
        let io = |e| EvalError::io("<record>", e);
        serde_json::to_writer(&mut w, &Line::Header(self.header.clone()))?;
        w.write_all(b"\n").map_err(io)?;
        for row in &self.rows {
            serde_json::to_writer(&mut w, &Line::Step(row.clone()))?;
            w.write_all(b"\n").map_err(io)?;
        }
        serde_json::to_writer(&mut w, &Line::Footer(self.footer.clone()))?;
        w.write_all(b"\n").map_err(io)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Reads any number of consecutive records.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<EpisodeRecord>, EvalError> {
    let mut out = Vec::new();
    let mut current: Option<(RecordHeader, Vec<StepRow>)> = None;
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| EvalError::io("<record>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| EvalError::Schema { line: n, message: e.to_string() })?;
        match (parsed, current.take()) {
            (Line::Header(h), None) => current = Some((h, Vec::new())),
            (Line::Step(row), Some((h, mut rows))) => {
                rows.push(row);
                current = Some((h, rows));
            }
            (Line::Footer(footer), Some((header, rows))) => out.push(EpisodeRecord { header, rows, footer }),
            (Line::Header(_), Some(_)) => {
                return Err(EvalError::Schema { line: n, message: "header before the previous footer".into() })
            }
            (_, None) => return Err(EvalError::Schema { line: n, message: "line outside a record".into() }),
        }
    }
    if current.is_some() {
        return Err(EvalError::Schema { line: 0, message: "record without footer".into() });
    }
    Ok(out)
}

pub fn write_records<W: Write>(records: &[EpisodeRecord], mut w: W) -> Result<(), EvalError> {
    for r in records {
        r.write_jsonl(&mut w)?;
    }
    Ok(())
}
