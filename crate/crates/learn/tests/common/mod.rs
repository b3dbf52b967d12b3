//! Toy networks and the finite-difference gradient oracle.

#![allow(dead_code)]

use assistlab_core::avatar::BiomechMode;
use assistlab_core::envs::Task;
use assistlab_core::robot::RobotProfileId;
use assistlab_core::seeding::rng_from_seed;
use assistlab_learn::net::{log_prob, Mlp, RunningNorm};
use assistlab_learn::ppo::{loss_and_grad, PpoParams};
use assistlab_learn::{PolicyNet, RolloutBatch};
use rand::Rng;

/// A 4-input policy with two 8-unit hidden layers and a 2-dim action.
/// Built field by field because no task observes 4 values.
pub fn toy_net(seed: u64) -> PolicyNet {
    let mut rng = rng_from_seed(seed);
    let actor = Mlp::init(&[4, 8, 8, 2], 1.0, &mut rng);
    let critic = Mlp::init(&[4, 8, 8, 1], 1.0, &mut rng);
    PolicyNet {
        format_version: 1,
        task: Task::Feeding,
        robot: RobotProfileId::ArmA,
        biomech: BiomechMode::Fixed,
        obs_dim: 4,
        layer_dims: actor.dims,
        critic_layer_dims: critic.dims,
        activation: "tanh".into(),
        action_scale: 1.0,
        weights: actor.layers,
        critic_weights: critic.layers,
        log_std: vec![rng.random_range(-1.0..0.0), rng.random_range(-1.0..0.0)],
        obs_norm: RunningNorm::identity(4),
        training_config_hash: String::new(),
        env_config_hash: String::new(),
    }
}

/// Old log-probs are offset from the current ones so that ratios land both
/// inside the clip range and well outside it, never near a kink.
pub fn toy_batch(net: &PolicyNet, n: usize, seed: u64) -> RolloutBatch {
    let mut rng = rng_from_seed(seed);
    let mut b = RolloutBatch::default();
    for i in 0..n {
        let obs: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mean = net.forward_normalized(&obs).mean;
        let u: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();
        let lp = log_prob(&mean, &net.log_std, &u);
        let offset = match i % 3 {
            0 => rng.random_range(-0.1..0.1),
            1 => rng.random_range(0.35..0.6),
            _ => rng.random_range(-0.6..-0.35),
        };
        b.obs.push(obs);
        b.actions.push(u);
        b.log_probs.push(lp + offset);
        b.rewards.push(rng.random_range(-1.0..1.0));
        b.values.push(0.0);
        b.dones.push(i + 1 == n);
        b.advantages.push(rng.random_range(-2.0..2.0));
        b.returns.push(rng.random_range(-3.0..3.0));
    }
    b
}

pub fn toy_params() -> PpoParams {
    PpoParams { clip: 0.2, value_coef: 0.5, entropy_coef: 0.05, epochs: 1, minibatch: 64, max_grad_norm: 0.0 }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Relative error between analytic and central-difference gradients for the
/// actor, critic and entropy terms.
pub fn gradient_check(seed: u64, h: f64) -> [f64; 3] {
    let net = toy_net(seed);
    let batch = toy_batch(&net, 24, seed + 1);
    let idx: Vec<usize> = (0..batch.len()).collect();
    let p = toy_params();
    let analytic = loss_and_grad(&net, &batch, &idx, &batch.advantages, &p);
    let base = net.params();
    let mut fd = [vec![0.0; base.len()], vec![0.0; base.len()], vec![0.0; base.len()]];
    let eval = |params: &[f64]| {
        let mut n = net.clone();
        n.set_params(params);
        let s = loss_and_grad(&n, &batch, &idx, &batch.advantages, &p).stats;
        [s.actor, s.critic, s.entropy]
    };
    for k in 0..base.len() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[k] += h;
        minus[k] -= h;
        let (lp, lm) = (eval(&plus), eval(&minus));
        for t in 0..3 {
            fd[t][k] = (lp[t] - lm[t]) / (2.0 * h);
        }
    }
    [
        rel_err(&analytic.actor, &fd[0]),
        rel_err(&analytic.critic, &fd[1]),
        rel_err(&analytic.entropy, &fd[2]),
    ]
}
