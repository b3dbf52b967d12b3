//! Deterministic batch evaluation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use assistlab_core::avatar::BiomechMode;
use assistlab_core::config::LabConfig;
use assistlab_core::envs::{Env, EnvSpec, HumanSource, Task};
use assistlab_core::robot::{Action, RobotProfileId};
use assistlab_core::seeding::rng_from_seed;
use assistlab_learn::PolicyNet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::record::{EpisodeRecord, RecordFooter, RecordHeader, StepRow, RECORD_FORMAT_VERSION};
use crate::EvalError;

/// A deterministic controller.
pub trait Policy: Sync {
    fn obs_dim(&self) -> usize;
    fn act(&self, obs: &[f64]) -> Result<Action, EvalError>;
}

/// Trained networks act with their mean action.
impl Policy for PolicyNet {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn act(&self, obs: &[f64]) -> Result<Action, EvalError> {
        Ok(self.act_mean(obs)?)
    }
}

/// Never moves.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub obs_dim: usize,
}

impl Policy for ZeroPolicy {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn act(&self, _obs: &[f64]) -> Result<Action, EvalError> {
        Ok(Action::zero())
    }
}

/// Training population of the policy under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Trained on fixed biomechanics.
    Original,
    /// Trained on randomized biomechanics.
    Revised,
    Scripted,
}

impl PolicyMode {
    pub fn of_training(biomech: BiomechMode) -> Self {
        match biomech {
            BiomechMode::Fixed => PolicyMode::Original,
            BiomechMode::Randomized => PolicyMode::Revised,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Original => "original",
            PolicyMode::Revised => "revised",
            PolicyMode::Scripted => "scripted",
        }
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(PolicyMode::Original),
            "revised" => Ok(PolicyMode::Revised),
            "scripted" => Ok(PolicyMode::Scripted),
            other => Err(format!("unknown policy mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub task: Task,
    pub robot: RobotProfileId,
    pub biomech: BiomechMode,
    pub episodes: u64,
    pub seed: u64,
    pub policy_id: String,
    pub policy_mode: PolicyMode,
}

impl EvalSpec {
    pub fn for_policy(net: &PolicyNet, policy_id: &str, episodes: u64, seed: u64) -> Self {
        Self {
            task: net.task,
            robot: net.robot,
            biomech: net.biomech,
            episodes,
            seed,
            policy_id: policy_id.to_owned(),
            policy_mode: PolicyMode::of_training(net.biomech),
        }
    }
}

/// One cell of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: Task,
    pub robot: RobotProfileId,
    pub policy_id: String,
    pub policy_mode: PolicyMode,
    pub human_source: HumanSource,
    pub biomech: BiomechMode,
    pub episodes: u64,
    pub successes: u64,
    pub mean_reward: f64,
    pub success_rate: f64,
}

impl MetricsRow {
    pub fn write_csv<W: std::io::Write>(rows: &[MetricsRow], w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| EvalError::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<MetricsRow>, EvalError> {
        let mut rd = csv::Reader::from_reader(r);
        let rows: Vec<MetricsRow> = rd.deserialize().collect::<Result<_, _>>()?;
        for row in &rows {
            if row.episodes > 0 && row.success_rate != row.successes as f64 / row.episodes as f64 {
                return Err(EvalError::Invalid(format!("success rate of {} disagrees with its counts", row.policy_id)));
            }
        }
        Ok(rows)
    }
}

/// Runs one episode with a deterministic policy and records it.
pub fn run_episode(
    policy: &dyn Policy,
    lab: &Arc<LabConfig>,
    spec: &EvalSpec,
    source: HumanSource,
    episode: u64,
) -> Result<EpisodeRecord, EvalError> {
    let header = RecordHeader {
        format_version: RECORD_FORMAT_VERSION,
        config_hash: lab.hash().to_owned(),
        base_seed: spec.seed,
        episode,
        task: spec.task,
        robot: spec.robot,
        policy_id: spec.policy_id.clone(),
        policy_mode: spec.policy_mode,
        biomech: spec.biomech,
        human_source: source,
    };
    let env_spec = EnvSpec { task: spec.task, robot: spec.robot, biomech: spec.biomech, source };
    let mut rng = rng_from_seed(header.episode_seed());
    let (mut env, mut obs) = Env::reset(Arc::clone(lab), env_spec, &mut rng);
    let mut rows = Vec::with_capacity(lab.env.episode.steps as usize);
    let mut total = 0.0;
    while !env.done() {
        let action = policy.act(&obs)?;
        let t = env.state().t;
        let tr = env.step(&action)?;
        total += tr.reward;
        rows.push(StepRow {
            t,
            obs: std::mem::replace(&mut obs, tr.observation),
            action: action.0,
            reward: tr.reward,
            force: tr.info.force,
            events: tr.info.events,
            human: None,
        });
    }
    let footer = RecordFooter { cumulative_reward: total, success: env.success()? };
    Ok(EpisodeRecord { header, rows, footer })
}

/// Mean reward and success over records, summed in episode order so the
/// result does not depend on execution order.
pub fn aggregate(records: &[EpisodeRecord]) -> Result<MetricsRow, EvalError> {
    let first = records.first().ok_or_else(|| EvalError::Invalid("no episodes to aggregate".into()))?;
    let h = &first.header;
    let mut sorted: Vec<&EpisodeRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.header.episode);
    let n = sorted.len() as u64;
    let successes = sorted.iter().filter(|r| r.footer.success).count() as u64;
    let mean_reward = sorted.iter().map(|r| r.footer.cumulative_reward).sum::<f64>() / n as f64;
    Ok(MetricsRow {
        task: h.task,
        robot: h.robot,
        policy_id: h.policy_id.clone(),
        policy_mode: h.policy_mode,
        human_source: h.human_source,
        biomech: h.biomech,
        episodes: n,
        successes,
        mean_reward,
        success_rate: successes as f64 / n as f64,
    })
}

/// Evaluates `spec.episodes` static-human episodes in parallel.
pub fn evaluate(
    policy: &dyn Policy,
    lab: &Arc<LabConfig>,
    spec: &EvalSpec,
) -> Result<(MetricsRow, Vec<EpisodeRecord>), EvalError> {
    if policy.obs_dim() != spec.task.obs_dim() {
        return Err(EvalError::ObsDimMismatch {
            policy: policy.obs_dim(),
            task: spec.task.to_string(),
            task_dim: spec.task.obs_dim(),
        });
    }
    if spec.episodes == 0 {
        return Err(EvalError::Invalid("episodes must be positive".into()));
    }
    let records: Vec<EpisodeRecord> = (0..spec.episodes)
        .into_par_iter()
        .map(|e| run_episode(policy, lab, spec, HumanSource::StaticSampled, e))
        .collect::<Result<_, _>>()?;
    Ok((aggregate(&records)?, records))
}
