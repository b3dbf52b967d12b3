//! Clipped-surrogate PPO with hand-derived gradients and Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gae::gae;
use crate::net::{entropy, log_prob, PolicyNet, LOG_STD_MAX, LOG_STD_MIN};
use crate::LearnError;

/// Flat per-step training data across whole episodes.
///
/// `obs` is stored already normalized, exactly as the policy saw it while
/// acting; `actions` are the unclamped Gaussian samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let n = self.len();
        for got in [self.obs.len(), self.actions.len(), self.log_probs.len(), self.values.len(), self.dones.len()] {
            if got != n {
                return Err(LearnError::DimensionMismatch { expected: n, got });
            }
        }
        if n > 0 && !self.dones[n - 1] {
            return Err(LearnError::InvalidConfig("batch ends mid-episode".into()));
        }
        Ok(())
    }

    /// Fills `advantages` and `returns`; the batch must end on an episode boundary.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), LearnError> {
        self.validate()?;
        let mut values = self.values.clone();
        values.push(0.0);
        let (adv, ret) = gae(&self.rewards, &values, &self.dones, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PpoParams {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LossStats {
    pub actor: f64,
    pub critic: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl std::fmt::Display for LossStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "actor={} critic={} entropy={} total={} kl={}",
            self.actor, self.critic, self.entropy, self.total, self.approx_kl
        )
    }
}

/// Loss terms and their gradients, each over the full parameter vector.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub stats: LossStats,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl LossGrad {
    pub fn total(&self) -> Vec<f64> {
        self.actor.iter().zip(&self.critic).zip(&self.entropy).map(|((a, c), e)| a + c + e).collect()
    }
}

/// Minibatch loss
/// `mean(−min(rA, clip(r)A)) + c_v·mean((V − R)²) − c_e·H`
/// with its gradient, split by term.
pub fn loss_and_grad(
    net: &PolicyNet,
    batch: &RolloutBatch,
    idx: &[usize],
    advantages: &[f64],
    p: &PpoParams,
) -> LossGrad {
    let actor = net.actor();
    let critic = net.critic();
    let na = actor.param_count();
    let nc = critic.param_count();
    let total = net.param_count();
    let mut g_actor = vec![0.0; total];
    let mut g_critic = vec![0.0; total];
    let mut g_entropy = vec![0.0; total];
    let mut stats = LossStats::default();
    let n = idx.len() as f64;
    let sigma: Vec<f64> = net.log_std.iter().map(|s| s.exp()).collect();
    let mut acts = Vec::new();

    for &i in idx {
        let obs = &batch.obs[i];
        let u = &batch.actions[i];
        let a = advantages[i];

        actor.forward_cached(obs, &mut acts);
        let mean = acts.last().expect("output layer").clone();
        let lp = log_prob(&mean, &net.log_std, u);
        let ratio = (lp - batch.log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - p.clip, 1.0 + p.clip);
        let (s1, s2) = (ratio * a, clipped * a);
        stats.actor -= s1.min(s2) / n;
        stats.approx_kl += (batch.log_probs[i] - lp) / n;
        if (ratio - 1.0).abs() > p.clip {
            stats.clip_fraction += 1.0 / n;
        }
        // the clipped branch has zero gradient wherever it is the minimum
        let dlp = if s1 <= s2 { -a * ratio / n } else { 0.0 };
        if dlp != 0.0 {
            let mut d_mean = vec![0.0; mean.len()];
            for k in 0..mean.len() {
                let z = (u[k] - mean[k]) / sigma[k];
                d_mean[k] = dlp * z / sigma[k];
                g_actor[na + nc + k] += dlp * (z * z - 1.0);
            }
            actor.backward(&acts, &d_mean, &mut g_actor[..na]);
        }

        critic.forward_cached(obs, &mut acts);
        let v = acts.last().expect("output layer")[0];
        let err = v - batch.returns[i];
        stats.critic += p.value_coef * err * err / n;
        critic.backward(&acts, &[2.0 * p.value_coef * err / n], &mut g_critic[na..na + nc]);
    }

    let h = entropy(&net.log_std);
    stats.entropy = -p.entropy_coef * h;
    for g in &mut g_entropy[na + nc..] {
        *g = -p.entropy_coef;
    }
    stats.total = stats.actor + stats.critic + stats.entropy;
    LossGrad { stats, actor: g_actor, critic: g_critic, entropy: g_entropy }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            params[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

/// Standardizes advantages to mean 0, std 1 (left centered only when the
/// spread is negligible).
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    adv.iter().map(|a| (a - mean) * scale).collect()
}

/// Several epochs of shuffled minibatch steps over one batch. Returns the
/// loss statistics averaged over all minibatches.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNet,
    batch: &RolloutBatch,
    p: &PpoParams,
    adam: &mut Adam,
    rng: &mut R,
) -> Result<LossStats, LearnError> {
    if batch.is_empty() {
        return Err(LearnError::InvalidConfig("empty batch".into()));
    }
    batch.validate()?;
    if batch.advantages.len() != batch.len() || batch.returns.len() != batch.len() {
        return Err(LearnError::InvalidConfig("advantages not computed".into()));
    }
    let adv = normalize_advantages(&batch.advantages);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut mean = LossStats::default();
    let mut steps = 0usize;
    for epoch in 0..p.epochs {
        order.shuffle(rng);
        for (mb, idx) in order.chunks(p.minibatch.max(1)).enumerate() {
            let lg = loss_and_grad(net, batch, idx, &adv, p);
            let mut grad = lg.total();
            if !lg.stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(LearnError::NonFiniteLoss { epoch, minibatch: mb, stats: lg.stats.to_string() });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if p.max_grad_norm > 0.0 && norm > p.max_grad_norm {
                let s = p.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            let mut params = net.params();
            adam.step(&mut params, &grad);
            net.set_params(&params);
            for s in &mut net.log_std {
                *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
            }
            let s = lg.stats;
            mean.actor += s.actor;
            mean.critic += s.critic;
            mean.entropy += s.entropy;
            mean.total += s.total;
            mean.approx_kl += s.approx_kl;
            mean.clip_fraction += s.clip_fraction;
            steps += 1;
        }
    }
    let k = steps.max(1) as f64;
    Ok(LossStats {
        actor: mean.actor / k,
        critic: mean.critic / k,
        entropy: mean.entropy / k,
        total: mean.total / k,
        approx_kl: mean.approx_kl / k,
        clip_fraction: mean.clip_fraction / k,
    })
}
