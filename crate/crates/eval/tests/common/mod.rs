#![allow(dead_code)]

pub mod tamper;
pub mod wilcoxon_oracle;

use std::sync::{Arc, OnceLock};

use assistlab_core::avatar::BiomechMode;
use assistlab_core::config::LabConfig;
use assistlab_core::envs::Task;
use assistlab_core::robot::RobotProfileId;
use assistlab_core::seeding::rng_from_seed;
use assistlab_learn::PolicyNet;

pub fn lab() -> Arc<LabConfig> {
    static LAB: OnceLock<Arc<LabConfig>> = OnceLock::new();
    LAB.get_or_init(|| Arc::new(LabConfig::shipped())).clone()
}

/// An untrained network with a wider initial output so actions are not tiny.
pub fn random_net(task: Task, robot: RobotProfileId, biomech: BiomechMode, seed: u64) -> PolicyNet {
    let mut rng = rng_from_seed(seed);
    let mut net = PolicyNet::init(task, robot, biomech, &[16, 16], -0.5, lab().env.robot.max_delta, &mut rng);
    let mut p = net.params();
    for (i, v) in p.iter_mut().enumerate() {
        *v += 0.3 * ((i as f64) * 0.7).sin();
    }
    net.set_params(&p);
    net
}
