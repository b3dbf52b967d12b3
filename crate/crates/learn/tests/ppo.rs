mod common;

use assistlab_core::seeding::rng_from_seed;
use assistlab_learn::net::log_prob;
use assistlab_learn::ppo::{loss_and_grad, normalize_advantages};
use assistlab_learn::{ppo_update, Adam, LearnError};
use common::{gradient_check, toy_batch, toy_net, toy_params};

#[test]
fn gradients_match_central_differences() {
    for seed in [1, 2, 3] {
        let [actor, critic, entropy] = gradient_check(seed, 1e-5);
        assert!(actor < 1e-4, "actor {actor}");
        assert!(critic < 1e-4, "critic {critic}");
        assert!(entropy < 1e-4, "entropy {entropy}");
    }
}

#[test]
fn zero_advantage_gives_zero_actor_gradient() {
    let net = toy_net(4);
    let mut batch = toy_batch(&net, 12, 5);
    batch.advantages.iter_mut().for_each(|a| *a = 0.0);
    let idx: Vec<usize> = (0..12).collect();
    let g = loss_and_grad(&net, &batch, &idx, &batch.advantages, &toy_params());
    assert!(g.actor.iter().all(|v| *v == 0.0));
    assert!(g.critic.iter().any(|v| *v != 0.0));
}

#[test]
fn clipped_sample_has_zero_actor_gradient() {
    let net = toy_net(6);
    let mut batch = toy_batch(&net, 1, 7);
    let p = toy_params();
    let lp = log_prob(&net.forward_normalized(&batch.obs[0]).mean, &net.log_std, &batch.actions[0]);
    // ratio = 1 + 2ε
    batch.log_probs[0] = lp - (1.0 + 2.0 * p.clip).ln();
    batch.advantages[0] = 1.0;
    let g = loss_and_grad(&net, &batch, &[0], &batch.advantages, &p);
    assert!(g.actor.iter().all(|v| *v == 0.0));
    assert_eq!(g.stats.clip_fraction, 1.0);
    // the same ratio with a negative advantage stays on the unclipped branch
    batch.advantages[0] = -1.0;
    let g = loss_and_grad(&net, &batch, &[0], &batch.advantages, &p);
    assert!(g.actor.iter().any(|v| *v != 0.0));
}

#[test]
fn advantages_are_standardized() {
    let a = normalize_advantages(&[1.0, 2.0, 3.0, 10.0]);
    let mean = a.iter().sum::<f64>() / 4.0;
    let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-12);
    assert_eq!(normalize_advantages(&[2.0, 2.0]), vec![0.0, 0.0]);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut adam = Adam::new(3, 0.1);
    let mut p = vec![1.0, -1.0, 0.0];
    adam.step(&mut p, &[2.0, -0.5, 0.0]);
    assert!((p[0] - 0.9).abs() < 1e-6);
    assert!((p[1] + 0.9).abs() < 1e-6);
    assert_eq!(p[2], 0.0);
}

#[test]
fn update_is_deterministic_and_keeps_log_std_bounded() {
    let run = || {
        let mut net = toy_net(8);
        let batch = toy_batch(&net, 40, 9);
        let mut p = toy_params();
        p.epochs = 3;
        p.minibatch = 16;
        let mut adam = Adam::new(net.param_count(), 0.5);
        let stats = ppo_update(&mut net, &batch, &p, &mut adam, &mut rng_from_seed(10)).unwrap();
        (net, stats)
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert!(a.log_std.iter().all(|s| (-5.0..=2.0).contains(s)));
}

#[test]
fn non_finite_loss_aborts() {
    let mut net = toy_net(11);
    let mut batch = toy_batch(&net, 8, 12);
    batch.returns[3] = f64::NAN;
    let before = net.clone();
    let mut adam = Adam::new(net.param_count(), 1e-3);
    let err = ppo_update(&mut net, &batch, &toy_params(), &mut adam, &mut rng_from_seed(1)).unwrap_err();
    assert!(matches!(err, LearnError::NonFiniteLoss { epoch: 0, minibatch: 0, .. }));
    assert_eq!(net, before);
}

#[test]
fn update_rejects_mid_episode_batch() {
    let mut net = toy_net(13);
    let mut batch = toy_batch(&net, 8, 14);
    batch.dones[7] = false;
    let mut adam = Adam::new(net.param_count(), 1e-3);
    assert!(ppo_update(&mut net, &batch, &toy_params(), &mut adam, &mut rng_from_seed(1)).is_err());
}
