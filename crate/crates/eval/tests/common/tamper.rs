//! Single-field modifications of an episode record.

use assistlab_core::avatar::BiomechMode;
use assistlab_core::envs::Task;
use assistlab_core::robot::RobotProfileId;
use assistlab_eval::{EpisodeRecord, PolicyMode};

/// Every tamper as (name, modified record). Each changes one field.
pub fn tampers(r: &EpisodeRecord) -> Vec<(String, EpisodeRecord)> {
    let mut out = Vec::new();
    let mut push = |name: &str, f: &dyn Fn(&mut EpisodeRecord)| {
        let mut t = r.clone();
        f(&mut t);
        assert_ne!(&t, r, "tamper {name} left the record unchanged");
        out.push((name.to_owned(), t));
    };
    let last = r.rows.len() - 1;
    let mid = r.rows.len() / 2;
    push("header.format_version", &|t| t.header.format_version += 1);
    push("header.config_hash", &|t| t.header.config_hash.replace_range(0..1, "x"));
    push("header.base_seed", &|t| t.header.base_seed ^= 1);
    push("header.episode", &|t| t.header.episode += 1);
    push("header.task", &|t| t.header.task = if t.header.task == Task::Feeding { Task::Drinking } else { Task::Feeding });
    push("header.robot", &|t| {
        t.header.robot = if t.header.robot == RobotProfileId::ArmA { RobotProfileId::ArmB } else { RobotProfileId::ArmA }
    });
    push("header.biomech", &|t| {
        t.header.biomech =
            if t.header.biomech == BiomechMode::Fixed { BiomechMode::Randomized } else { BiomechMode::Fixed }
    });
    push("header.policy_id", &|t| t.header.policy_id.push('x'));
    push("header.policy_mode", &|t| {
        t.header.policy_mode =
            if t.header.policy_mode == PolicyMode::Original { PolicyMode::Revised } else { PolicyMode::Original }
    });
    push("row.t", &|t| t.rows[mid].t += 1);
    push("row.obs", &|t| t.rows[mid].obs[0] += 1e-12);
    push("row.obs.len", &|t| {
        t.rows[mid].obs.pop();
    });
    push("row.action", &|t| t.rows[mid].action[2] += 1e-9);
    push("row.reward", &|t| t.rows[mid].reward += 1e-9);
    push("row.force", &|t| t.rows[last].force += 1.0);
    push("row.events.captured", &|t| t.rows[mid].events.captured += 1);
    push("row.events.spilled", &|t| t.rows[mid].events.spilled += 1);
    push("row.events.released", &|t| t.rows[mid].events.released += 1);
    push("row.events.scratched", &|t| t.rows[mid].events.scratched ^= true);
    push("row.events.wiped", &|t| t.rows[mid].events.wiped += 1);
    push("row.human", &|t| {
        t.rows[mid].human = match t.rows[mid].human {
            Some(mut h) => {
                h[0] += 1e-6;
                Some(h)
            }
            None => Some([0.0; 20]),
        }
    });
    push("rows.dropped", &|t| {
        t.rows.pop();
    });
    push("footer.cumulative_reward", &|t| t.footer.cumulative_reward += 1e-9);
    push("footer.success", &|t| t.footer.success ^= true);
    out
}
