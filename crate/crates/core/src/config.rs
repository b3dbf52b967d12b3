//! Versioned environment and robot-profile configuration.
//!
//! Defaults ship inside the crate (`assets/`). The whole configuration is
//! hashed so episode records can prove which settings produced them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::envs::Task;
use crate::kinematics::{ik_dls, ChainSpec, FrameSpec, IkParams, JointChain};
use crate::pose::Pose6;
use crate::robot::{RobotProfileId, Tool};
use crate::seeding::rng_from_seed;

pub const ENV_SCHEMA_VERSION: u32 = 1;
pub const PROFILE_SCHEMA_VERSION: u32 = 1;

const DEFAULT_ENV: &str = include_str!("../assets/env.toml");
const DEFAULT_ARM_A: &str = include_str!("../assets/robots/arm_a.toml");
const DEFAULT_ARM_B: &str = include_str!("../assets/robots/arm_b.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Parse(String, String),
    #[error("unsupported {what} schema version {found}")]
    Version { what: &'static str, found: u32 },
    #[error("robot profile {profile}: {message}")]
    Profile { profile: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub steps: u32,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotLimits {
    pub max_delta: f64,
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub distance_weight: f64,
    pub capture_bonus: f64,
    pub spill_penalty: f64,
    pub scratch_bonus: f64,
    pub wipe_bonus: f64,
    pub force_weight: f64,
    pub force_cap: f64,
    pub itch_force_cap: f64,
    pub tilt_weight: f64,
    pub tilt_gate: f64,
    pub tilt_full_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub food_count: usize,
    pub water_count: usize,
    pub gravity: f64,
    pub mouth_radius: f64,
    pub spill_drop: f64,
    pub spoon_release_deg: f64,
    pub spoon_mouth_capture: bool,
    pub cup_radius: f64,
    pub cup_height: f64,
    pub cup_pour_start_deg: f64,
    pub cup_pour_full_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScratchConfig {
    pub radius: f64,
    pub min_tangential: f64,
    pub near_itch_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathingConfig {
    pub marker_count: usize,
    pub marker_spacing: f64,
    pub marker_start: f64,
    pub row_angles: Vec<f64>,
    pub wipe_radius: f64,
    pub wipe_max_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessConfig {
    pub feeding_fraction: f64,
    pub drinking_fraction: f64,
    pub scratch_count: u32,
    pub bathing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanConfig {
    pub seat_waist: [f64; 3],
    pub bed_waist: [f64; 3],
    pub head_range: f64,
    pub arm_range: [f64; 7],
    pub bed_arm_rest: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub version: u32,
    pub episode: EpisodeConfig,
    pub robot: RobotLimits,
    pub reward: RewardConfig,
    pub particles: ParticleConfig,
    pub scratching: ScratchConfig,
    pub bathing: BathingConfig,
    pub success: SuccessConfig,
    pub human: HumanConfig,
    pub ik: IkParams,
}

impl EnvConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: EnvConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse("env config".into(), e.to_string()))?;
        if cfg.version != ENV_SCHEMA_VERSION {
            return Err(ConfigError::Version { what: "env config", found: cfg.version });
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlacementSpec {
    pub base: FrameSpec,
    pub home_tool: FrameSpec,
}

/// Robot profile as written in TOML: the chain schema plus tools and
/// per-task base placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotProfileSpec {
    pub version: u32,
    pub name: RobotProfileId,
    pub home_seed: [f64; 7],
    pub chain: ChainSpec,
    pub tools: BTreeMap<Tool, FrameSpec>,
    pub tasks: BTreeMap<Task, TaskPlacementSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlacement {
    pub base: Pose6,
    pub home_tool: Pose6,
    /// Joint configuration putting the task tool at `home_tool`.
    pub home_q: [f64; 7],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotProfile {
    pub spec: RobotProfileSpec,
    /// Chain with its own (identity) base; the task base is applied per task.
    pub chain: JointChain,
    pub tools: BTreeMap<Tool, Pose6>,
    pub tasks: BTreeMap<Task, TaskPlacement>,
}

impl RobotProfile {
    pub fn from_toml(text: &str, ik: &IkParams) -> Result<Self, ConfigError> {
        let spec: RobotProfileSpec =
            toml::from_str(text).map_err(|e| ConfigError::Parse("robot profile".into(), e.to_string()))?;
        Self::from_spec(spec, ik)
    }

    pub fn from_spec(spec: RobotProfileSpec, ik: &IkParams) -> Result<Self, ConfigError> {
        let err = |m: String| ConfigError::Profile { profile: spec.name.to_string(), message: m };
        if spec.version != PROFILE_SCHEMA_VERSION {
            return Err(ConfigError::Version { what: "robot profile", found: spec.version });
        }
        let chain = spec.chain.build().map_err(|e| err(e.to_string()))?;
        if chain.dof() != 7 {
            return Err(err(format!("expected 7 joints, found {}", chain.dof())));
        }
        let tools: BTreeMap<Tool, Pose6> = spec.tools.iter().map(|(k, v)| (*k, v.pose())).collect();
        let mut tasks = BTreeMap::new();
        for task in Task::ALL {
            let placement = spec
                .tasks
                .get(&task)
                .ok_or_else(|| err(format!("missing placement for {task}")))?;
            let tool = tools
                .get(&task.tool())
                .ok_or_else(|| err(format!("missing tool {:?}", task.tool())))?;
            let base = placement.base.pose();
            let home_tool = placement.home_tool.pose();
            let posed = chain.with_base(base).with_tool(tool);
            let home_q = solve_home(&posed, &spec.home_seed, &home_tool, ik)
                .map_err(|m| err(format!("home tool pose for {task}: {m}")))?;
            tasks.insert(task, TaskPlacement { base, home_tool, home_q });
        }
        Ok(Self { spec, chain, tools, tasks })
    }

    pub fn id(&self) -> RobotProfileId {
        self.spec.name
    }
}

const HOME_RESTARTS: usize = 256;

/// Solves for a home configuration, starting from `seed` and then from a
/// fixed sequence of random in-limit seeds until one converges.
fn solve_home(chain: &JointChain, seed: &[f64; 7], target: &Pose6, ik: &IkParams) -> Result<[f64; 7], String> {
    let solver = IkParams {
        max_iterations: 3000,
        position_tolerance: 1e-4,
        orientation_tolerance: 1e-3,
        ..*ik
    };
    let mut rng = rng_from_seed(0x686f6d65);
    let mut q0 = *seed;
    chain.clamp(&mut q0);
    let mut best = f64::INFINITY;
    for _ in 0..=HOME_RESTARTS {
        let sol = ik_dls(chain, &q0, target, &solver).map_err(|e| e.to_string())?;
        if sol.converged {
            let mut q = [0.0; 7];
            q.copy_from_slice(&sol.q);
            return Ok(q);
        }
        best = best.min(sol.position_residual);
        for (v, (lo, hi)) in q0.iter_mut().zip(chain.limits()) {
            *v = rng.random_range(lo..=hi);
        }
    }
    Err(format!("unreachable (best position residual {best:.4} m)"))
}

/// Everything that determines simulation behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub env: EnvConfig,
    pub robots: BTreeMap<RobotProfileId, RobotProfile>,
    hash: String,
}

impl LabConfig {
    pub fn new(env: EnvConfig, robots: Vec<RobotProfile>) -> Self {
        let robots: BTreeMap<_, _> = robots.into_iter().map(|r| (r.id(), r)).collect();
        let hash = Self::compute_hash(&env, &robots);
        Self { env, robots, hash }
    }

    /// The configuration shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_texts(DEFAULT_ENV, &[DEFAULT_ARM_A, DEFAULT_ARM_B]).expect("shipped configuration is valid")
    }

    pub fn from_texts(env: &str, robots: &[&str]) -> Result<Self, ConfigError> {
        let env = EnvConfig::from_toml(env)?;
        let robots = robots
            .iter()
            .map(|t| RobotProfile::from_toml(t, &env.ik))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(env, robots))
    }

    /// Loads `env.toml` and every `*.toml` in `robots/` under `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ConfigError> {
        let env = std::fs::read_to_string(dir.join("env.toml"))?;
        let mut texts = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir.join("robots"))?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            if e.path().extension().is_some_and(|x| x == "toml") {
                texts.push(std::fs::read_to_string(e.path())?);
            }
        }
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        Self::from_texts(&env, &refs)
    }

    fn compute_hash(env: &EnvConfig, robots: &BTreeMap<RobotProfileId, RobotProfile>) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(env).expect("config serializes"));
        for r in robots.values() {
            h.update(serde_json::to_vec(&r.spec).expect("profile serializes"));
        }
        hex::encode(h.finalize())
    }

    /// Hex SHA-256 over the canonical JSON form of the configuration.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn robot(&self, id: RobotProfileId) -> &RobotProfile {
        self.robots.get(&id).expect("profile present in configuration")
    }
}
