//! Re-simulation of recorded episodes.

use std::sync::Arc;

use assistlab_core::config::LabConfig;
use assistlab_core::envs::{Env, EnvSpec, HumanSource};
use assistlab_core::robot::Action;
use assistlab_core::seeding::rng_from_seed;
use serde::Serialize;

use crate::evaluate::{Policy, PolicyMode};
use crate::record::EpisodeRecord;
use crate::EvalError;

/// First place where the record and the re-simulation disagree. `step` is
/// `None` for header and footer fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub step: Option<u32>,
    pub field: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub steps: u32,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn clean(&self) -> bool {
        self.divergence.is_none()
    }
}

/// A policy to check recorded actions against, with the identity it claims.
pub struct PolicyCheck<'a> {
    pub policy: &'a dyn Policy,
    pub id: &'a str,
    pub mode: PolicyMode,
}

fn diverge<T: std::fmt::Debug>(step: Option<u32>, field: &str, recorded: T, replayed: T) -> ReplayReport {
    ReplayReport {
        steps: step.unwrap_or(0),
        divergence: Some(Divergence {
            step,
            field: field.into(),
            recorded: format!("{recorded:?}"),
            replayed: format!("{replayed:?}"),
        }),
    }
}

/// Re-simulates from the header seed applying the recorded actions (and, for
/// live episodes, the recorded human joints) and compares every field.
/// With a policy, each recorded action must also equal the policy's output.
pub fn replay(
    record: &EpisodeRecord,
    lab: &Arc<LabConfig>,
    check: Option<&PolicyCheck<'_>>,
) -> Result<ReplayReport, EvalError> {
    let h = &record.header;
    if h.config_hash != lab.hash() {
        return Err(EvalError::ConfigHashMismatch { recorded: h.config_hash.clone(), installed: lab.hash().to_owned() });
    }
    record.validate_structure(lab.env.episode.steps)?;
    if let Some(c) = check {
        if c.id != h.policy_id {
            return Ok(diverge(None, "policy_id", h.policy_id.as_str(), c.id));
        }
        if c.mode != h.policy_mode {
            return Ok(diverge(None, "policy_mode", h.policy_mode, c.mode));
        }
        if c.policy.obs_dim() != h.task.obs_dim() {
            return Ok(diverge(None, "task", h.task.obs_dim(), c.policy.obs_dim()));
        }
    }
    let spec = EnvSpec { task: h.task, robot: h.robot, biomech: h.biomech, source: h.human_source };
    let mut rng = rng_from_seed(h.episode_seed());
    let (mut env, _) = Env::reset(Arc::clone(lab), spec, &mut rng);
    let mut total = 0.0;
    for row in &record.rows {
        let t = Some(row.t);
        if let Some(joints) = &row.human {
            let mut human = env.state().human;
            human.set_joints(joints);
            if !human.within_limits() {
                return Ok(diverge(t, "human", "within limits", "outside limits"));
            }
            env.set_human(human);
        } else if h.human_source == HumanSource::Live {
            return Ok(diverge(t, "human", "missing", "required"));
        }
        let obs = env.observation();
        if obs != row.obs {
            return Ok(diverge(t, "obs", &row.obs, &obs));
        }
        if let Some(c) = check {
            let a = c.policy.act(&obs)?;
            if a.0 != row.action {
                return Ok(diverge(t, "action", row.action, a.0));
            }
        }
        let tr = env.step(&Action(row.action))?;
        if tr.reward.to_bits() != row.reward.to_bits() {
            return Ok(diverge(t, "reward", row.reward, tr.reward));
        }
        if tr.info.force.to_bits() != row.force.to_bits() {
            return Ok(diverge(t, "force", row.force, tr.info.force));
        }
        if tr.info.events != row.events {
            return Ok(diverge(t, "events", row.events, tr.info.events));
        }
        total += tr.reward;
    }
    if total.to_bits() != record.footer.cumulative_reward.to_bits() {
        return Ok(diverge(None, "cumulative_reward", record.footer.cumulative_reward, total));
    }
    let success = env.success()?;
    if success != record.footer.success {
        return Ok(diverge(None, "success", record.footer.success, success));
    }
    Ok(ReplayReport { steps: record.rows.len() as u32, divergence: None })
}
