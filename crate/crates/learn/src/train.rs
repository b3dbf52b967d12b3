//! Rollout collection and the training loop.

use std::path::Path;
use std::sync::Arc;

use assistlab_core::avatar::BiomechMode;
use assistlab_core::config::LabConfig;
use assistlab_core::envs::{Env, EnvSpec, HumanSource, Task};
use assistlab_core::robot::RobotProfileId;
use assistlab_core::seeding::{derive_seed, rng_from_seed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::net::PolicyNet;
use crate::ppo::{ppo_update, Adam, LossStats, PpoParams, RolloutBatch};
use crate::LearnError;

const INIT_STREAM: u64 = 1;
const ROLLOUT_STREAM: u64 = 2;
const UPDATE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainConfig {
    pub task: Task,
    pub robot: RobotProfileId,
    pub biomech: BiomechMode,
    pub rollouts_per_iteration: usize,
    pub total_rollouts: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Write a checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    /// Desk-scale defaults: 500 rollouts of 200 steps.
    pub fn desk(task: Task, robot: RobotProfileId, biomech: BiomechMode, seed: u64) -> Self {
        Self {
            task,
            robot,
            biomech,
            rollouts_per_iteration: 10,
            total_rollouts: 500,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 512,
            learning_rate: 3e-4,
            seed,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            init_log_std: -0.5,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must lie in (0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.rollouts_per_iteration == 0 || self.minibatch == 0 || self.epochs == 0 {
            return bad("rollouts per iteration, minibatch and epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    pub fn ppo(&self) -> PpoParams {
        PpoParams {
            clip: self.clip,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            epochs: self.epochs,
            minibatch: self.minibatch,
            max_grad_norm: self.max_grad_norm,
        }
    }

    /// Hex SHA-256 of the JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec { task: self.task, robot: self.robot, biomech: self.biomech, source: HumanSource::StaticSampled }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CurvePoint {
    pub iteration: usize,
    pub rollouts: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub loss: LossStats,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: PolicyNet,
    pub curve: Vec<CurvePoint>,
}

/// One sampled episode.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub raw_obs: Vec<Vec<f64>>,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub success: bool,
}

/// The randomly initialized network `train` starts from.
pub fn initial_policy(lab: &LabConfig, cfg: &TrainConfig) -> PolicyNet {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[INIT_STREAM]));
    let mut net = PolicyNet::init(
        cfg.task,
        cfg.robot,
        cfg.biomech,
        &cfg.hidden,
        cfg.init_log_std,
        lab.env.robot.max_delta,
        &mut rng,
    );
    net.training_config_hash = cfg.hash();
    net.env_config_hash = lab.hash().to_owned();
    net
}

/// Runs one stochastic episode with its own seed.
pub fn sample_episode(net: &PolicyNet, lab: &Arc<LabConfig>, spec: EnvSpec, seed: u64) -> Result<EpisodeTrace, LearnError> {
    let mut rng = rng_from_seed(seed);
    let (mut env, mut obs) = Env::reset(Arc::clone(lab), spec, &mut rng);
    let steps = lab.env.episode.steps as usize;
    let mut tr = EpisodeTrace {
        raw_obs: Vec::with_capacity(steps),
        obs: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        log_probs: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        total_reward: 0.0,
        success: false,
    };
    while !env.done() {
        let norm = net.normalize(&obs);
        let value = net.forward_normalized(&norm).value;
        let (action, u, lp) = net.act_sample(&obs, &mut rng)?;
        let step = env.step(&action)?;
        tr.raw_obs.push(std::mem::replace(&mut obs, step.observation));
        tr.obs.push(norm);
        tr.actions.push(u);
        tr.log_probs.push(lp);
        tr.values.push(value);
        tr.rewards.push(step.reward);
        tr.total_reward += step.reward;
    }
    tr.success = env.success()?;
    Ok(tr)
}

/// Episodes for one iteration, collected in parallel. Each episode seeds
/// from `(seed, iteration, index)`, so the result does not depend on the
/// worker count or scheduling.
pub fn collect_rollouts(
    net: &PolicyNet,
    lab: &Arc<LabConfig>,
    spec: EnvSpec,
    seed: u64,
    iteration: usize,
    count: usize,
) -> Result<Vec<EpisodeTrace>, LearnError> {
    (0..count)
        .into_par_iter()
        .map(|e| sample_episode(net, lab, spec, derive_seed(seed, &[ROLLOUT_STREAM, iteration as u64, e as u64])))
        .collect()
}

fn to_batch(traces: &[EpisodeTrace]) -> RolloutBatch {
    let mut b = RolloutBatch::default();
    for t in traces {
        let n = t.rewards.len();
        b.obs.extend(t.obs.iter().cloned());
        b.actions.extend(t.actions.iter().cloned());
        b.log_probs.extend_from_slice(&t.log_probs);
        b.values.extend_from_slice(&t.values);
        b.rewards.extend_from_slice(&t.rewards);
        b.dones.extend((0..n).map(|k| k + 1 == n));
    }
    b
}

/// PPO on static sampled humans. With `total_rollouts == 0` the initial
/// network is returned untouched.
pub fn train(lab: Arc<LabConfig>, cfg: &TrainConfig, checkpoints: Option<&Path>) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    let mut net = initial_policy(&lab, cfg);
    let mut curve = Vec::new();
    let mut adam = Adam::new(net.param_count(), cfg.learning_rate);
    let mut update_rng = rng_from_seed(derive_seed(cfg.seed, &[UPDATE_STREAM]));
    let spec = cfg.env_spec();
    let mut done = 0;
    let mut iteration = 0;
    while done < cfg.total_rollouts {
        let count = cfg.rollouts_per_iteration.min(cfg.total_rollouts - done);
        let traces = collect_rollouts(&net, &lab, spec, cfg.seed, iteration, count)?;
        let mut batch = to_batch(&traces);
        batch.compute_advantages(cfg.gamma, cfg.lambda)?;
        let loss = ppo_update(&mut net, &batch, &cfg.ppo(), &mut adam, &mut update_rng)?;
        let raw: Vec<Vec<f64>> = traces.iter().flat_map(|t| t.raw_obs.iter().cloned()).collect();
        net.obs_norm.update(&raw);
        done += count;
        let point = CurvePoint {
            iteration,
            rollouts: done,
            mean_reward: traces.iter().map(|t| t.total_reward).sum::<f64>() / count as f64,
            success_rate: traces.iter().filter(|t| t.success).count() as f64 / count as f64,
            loss,
        };
        tracing::info!(
            iteration,
            rollouts = done,
            mean_reward = point.mean_reward,
            success_rate = point.success_rate,
            "training iteration"
        );
        curve.push(point);
        iteration += 1;
        if let Some(dir) = checkpoints {
            if cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0 {
                net.save(&dir.join(format!("checkpoint-{iteration:04}.json")))?;
            }
        }
    }
    Ok(TrainOutcome { policy: net, curve })
}
