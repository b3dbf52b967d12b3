//! Environment invariant checks shared by the unit suite and the acceptance
//! gate. Each returns `Err` with a description of the first violation.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use assistlab_core::avatar::{Anthropometrics, BiomechMode, Sex};
use assistlab_core::config::LabConfig;
use assistlab_core::envs::*;
use assistlab_core::robot::{Action, RobotProfileId, ROBOT_DOF};
use assistlab_core::seeding::{rng_from_seed, SimRng};
use rand::Rng;

pub fn shipped() -> Arc<LabConfig> {
    static CFG: OnceLock<Arc<LabConfig>> = OnceLock::new();
    CFG.get_or_init(|| Arc::new(LabConfig::shipped())).clone()
}

pub fn spec(task: Task, robot: RobotProfileId, biomech: BiomechMode) -> EnvSpec {
    EnvSpec { task, robot, biomech, source: HumanSource::StaticSampled }
}

fn random_action(rng: &mut SimRng, max: f64) -> Action {
    let mut a = [0.0; ROBOT_DOF];
    for v in &mut a {
        *v = rng.random_range(-max..=max);
    }
    Action(a)
}

/// Random walk with a drift on the wrist joints so utensils eventually tip.
fn drifting_action(rng: &mut SimRng, max: f64, t: u32) -> Action {
    let mut a = random_action(rng, max);
    if t > 40 {
        a.0[5] = max;
        a.0[6] = max;
    }
    a
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

/// Particles are conserved; captured, spilled, wiped and scratch counts never
/// decrease; terminal particle states never change.
pub fn conservation_and_monotonicity(episodes: u64) -> Result<(), String> {
    let cfg = shipped();
    let max = cfg.env.robot.max_delta;
    for task in Task::ALL {
        for robot in RobotProfileId::ALL {
            for seed in 0..episodes {
                let mut rng = rng_from_seed(seed * 31 + 7);
                let (mut env, _) = Env::reset(cfg.clone(), spec(task, robot, BiomechMode::Randomized), &mut rng);
                let total = env.state().particles.len();
                let mut prev = env.progress();
                let mut prev_status: Vec<ParticleStatus> = env.state().particles.iter().map(|p| p.status).collect();
                let mut prev_wiped: Vec<bool> = env.state().markers.iter().map(|m| m.wiped).collect();
                while !env.done() {
                    let t = env.state().t;
                    let tr = env.step(&drifting_action(&mut rng, max, t)).map_err(|e| e.to_string())?;
                    let p = env.progress();
                    let counts = ParticleCounts::of(&env.state().particles);
                    ensure!(counts.total() == total, "{task}/{robot}: particle count {} != {total}", counts.total());
                    ensure!(p.captured >= prev.captured, "{task}/{robot}: captured decreased at t={t}");
                    ensure!(p.wiped >= prev.wiped, "{task}/{robot}: wiped decreased at t={t}");
                    ensure!(p.scratches >= prev.scratches, "{task}/{robot}: scratches decreased at t={t}");
                    ensure!(
                        p.captured - prev.captured == tr.info.events.captured as usize,
                        "{task}/{robot}: capture events disagree with counts"
                    );
                    for (old, new) in prev_status.iter().zip(&env.state().particles) {
                        let terminal = matches!(old, ParticleStatus::Captured | ParticleStatus::Spilled);
                        ensure!(!terminal || *old == new.status, "{task}/{robot}: terminal particle changed state");
                        ensure!(
                            !(*old == ParticleStatus::Free && new.status == ParticleStatus::Held),
                            "{task}/{robot}: free particle returned to the utensil"
                        );
                    }
                    for (old, m) in prev_wiped.iter().zip(&env.state().markers) {
                        ensure!(!old || m.wiped, "{task}/{robot}: marker un-wiped");
                    }
                    prev = p;
                    prev_status = env.state().particles.iter().map(|p| p.status).collect();
                    prev_wiped = env.state().markers.iter().map(|m| m.wiped).collect();
                }
            }
        }
    }
    Ok(())
}

/// Inclusive threshold boundaries with the shipped success config.
pub fn success_boundaries() -> Result<(), String> {
    let cfg = shipped();
    let s = &cfg.env.success;
    let parts = |captured, particles| TaskProgress { captured, particles, ..Default::default() };
    let scratches = |n| TaskProgress { scratches: n, ..Default::default() };
    let wipes = |wiped, markers| TaskProgress { wiped, markers, ..Default::default() };
    let cases = [
        (Task::Feeding, parts(6, 8), true),
        (Task::Feeding, parts(5, 8), false),
        (Task::Drinking, parts(38, 50), true),
        (Task::Drinking, parts(37, 50), false),
        (Task::Scratching, scratches(25), true),
        (Task::Scratching, scratches(24), false),
        (Task::Bathing, wipes(3, 10), true),
        (Task::Bathing, wipes(2, 10), false),
        (Task::Bathing, wipes(8, 24), true),
        (Task::Bathing, wipes(7, 24), false),
        (Task::Feeding, parts(0, 0), false),
    ];
    for (task, progress, want) in cases {
        let got = meets_success(task, s, &progress);
        ensure!(got == want, "{task} {progress:?}: expected {want}, got {got}");
    }
    Ok(())
}

/// Exactly `steps` transitions; the last one is flagged done and any further
/// step is refused. Success is unavailable mid-episode.
pub fn episode_length() -> Result<(), String> {
    let cfg = shipped();
    let steps = cfg.env.episode.steps;
    ensure!(steps == 200, "shipped episode length is {steps}");
    for task in Task::ALL {
        let mut rng = rng_from_seed(11);
        let (mut env, _) = Env::reset(cfg.clone(), spec(task, RobotProfileId::ArmA, BiomechMode::Fixed), &mut rng);
        let mut n = 0u32;
        loop {
            ensure!(env.success().is_err(), "{task}: success available at t={n}");
            let tr = env.step(&Action::zero()).map_err(|e| e.to_string())?;
            n += 1;
            ensure!(tr.done == (n == steps), "{task}: done flag {} at step {n}", tr.done);
            if tr.done {
                break;
            }
            ensure!(n < steps, "{task}: episode ran past {steps}");
        }
        ensure!(n == steps, "{task}: {n} steps");
        ensure!(
            matches!(env.step(&Action::zero()), Err(EnvError::EpisodeFinished(t)) if t == steps),
            "{task}: step after done was accepted"
        );
        ensure!(env.success().is_ok(), "{task}: success missing after done");
    }
    Ok(())
}

fn rollout_fingerprint(task: Task, robot: RobotProfileId, seed: u64) -> Result<Vec<String>, String> {
    let cfg = shipped();
    let mut rng = rng_from_seed(seed);
    let (mut env, obs) = Env::reset(cfg.clone(), spec(task, robot, BiomechMode::Randomized), &mut rng);
    let mut out = vec![serde_json::to_string(&obs).unwrap(), serde_json::to_string(env.state()).unwrap()];
    let max = cfg.env.robot.max_delta;
    while !env.done() {
        let t = env.state().t;
        let tr = env.step(&drifting_action(&mut rng, max, t)).map_err(|e| e.to_string())?;
        out.push(format!("{:016x}", tr.reward.to_bits()));
        out.push(serde_json::to_string(&tr.observation).unwrap());
        out.push(serde_json::to_string(env.state()).unwrap());
    }
    Ok(out)
}

/// Same seed, same stream; a different seed gives a different episode.
pub fn seed_determinism() -> Result<(), String> {
    for task in Task::ALL {
        for robot in RobotProfileId::ALL {
            let a = rollout_fingerprint(task, robot, 42)?;
            let b = rollout_fingerprint(task, robot, 42)?;
            ensure!(a == b, "{task}/{robot}: same seed diverged");
            let c = rollout_fingerprint(task, robot, 43)?;
            ensure!(a != c, "{task}/{robot}: different seeds gave identical episodes");
        }
    }
    Ok(())
}

/// Every check of the environment suite, in order.
pub fn run_all() -> Result<(), String> {
    conservation_and_monotonicity(4)?;
    success_boundaries()?;
    episode_length()?;
    seed_determinism()
}

/// Default body for whichever sex the sampler chose.
pub fn is_default_body(body: &Anthropometrics) -> bool {
    [Sex::Male, Sex::Female].iter().any(|s| Anthropometrics::default_for(*s) == *body)
}
