//! Feeding, drinking, itch scratching and bed bathing.
//!
//! An [`Env`] owns one episode: a human (static or live), the robot, the
//! particles or markers of the task, and the bookkeeping for reward and
//! success. Stepping is pure arithmetic on `f64`, so two environments built
//! from the same seed produce bitwise identical trajectories.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::avatar::{
    mirror_arm, sample_biomechanics, Anthropometrics, ArmSegment, ArmSurfacePoint, BiomechMode,
    HumanState, Sex, Side,
};
use crate::config::{LabConfig, ParticleConfig, SuccessConfig};
use crate::geometry::point_segment_distance;
use crate::pose::Pose6;
use crate::robot::{apply_action, contact_force, Action, RobotProfileId, RobotState, Tool, ROBOT_DOF};

pub const HEAD_OBS_DIM: usize = 21;
pub const ARM_OBS_DIM: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Feeding,
    Drinking,
    Scratching,
    Bathing,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Feeding, Task::Drinking, Task::Scratching, Task::Bathing];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Feeding => "feeding",
            Task::Drinking => "drinking",
            Task::Scratching => "scratching",
            Task::Bathing => "bathing",
        }
    }

    pub fn tool(self) -> Tool {
        match self {
            Task::Feeding => Tool::Spoon,
            Task::Drinking => Tool::Cup,
            Task::Scratching => Tool::Scratcher,
            Task::Bathing => Tool::Wipe,
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Task::Feeding | Task::Drinking => HEAD_OBS_DIM,
            Task::Scratching | Task::Bathing => ARM_OBS_DIM,
        }
    }

    /// The person lies on a bed for bathing and sits otherwise.
    pub fn in_bed(self) -> bool {
        self == Task::Bathing
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task '{s}' (expected feeding, drinking, scratching or bathing)"))
    }
}

/// Where the human's pose comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanSource {
    /// Randomized once at reset, then held for the whole episode.
    StaticSampled,
    /// Driven frame by frame from tracked input via [`Env::set_human`].
    Live,
}

impl fmt::Display for HumanSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HumanSource::StaticSampled => "static_sampled",
            HumanSource::Live => "live",
        })
    }
}

impl FromStr for HumanSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static_sampled" | "static" => Ok(HumanSource::StaticSampled),
            "live" => Ok(HumanSource::Live),
            _ => Err(format!("unknown human source '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("episode already finished at step {0}")]
    EpisodeFinished(u32),
    #[error("episode not finished (step {t} of {steps})")]
    EpisodeNotFinished { t: u32, steps: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleStatus {
    Held,
    Free,
    Captured,
    Spilled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Resting place in the utensil frame while held.
    pub local: Vector3<f64>,
    /// Utensil tilt from vertical (degrees) above which this particle leaves.
    pub release_tilt_deg: f64,
    pub status: ParticleStatus,
}

impl Particle {
    pub fn held(local: Vector3<f64>, release_tilt_deg: f64, utensil: &Pose6) -> Self {
        Self {
            position: utensil.transform_point(&local),
            velocity: Vector3::zeros(),
            local,
            release_tilt_deg,
            status: ParticleStatus::Held,
        }
    }

    pub fn free(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            position,
            velocity,
            local: Vector3::zeros(),
            release_tilt_deg: 0.0,
            status: ParticleStatus::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleCounts {
    pub held: usize,
    pub free: usize,
    pub captured: usize,
    pub spilled: usize,
}

impl ParticleCounts {
    pub fn of(particles: &[Particle]) -> Self {
        let mut c = Self::default();
        for p in particles {
            match p.status {
                ParticleStatus::Held => c.held += 1,
                ParticleStatus::Free => c.free += 1,
                ParticleStatus::Captured => c.captured += 1,
                ParticleStatus::Spilled => c.spilled += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.held + self.free + self.captured + self.spilled
    }
}

/// Status changes produced by one particle substep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleEvents {
    pub released: u32,
    pub captured: u32,
    pub spilled: u32,
}

/// Angle in degrees between the utensil's +z axis and world up.
pub fn tilt_deg(utensil: &Pose6) -> f64 {
    utensil.z_axis().z.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Lowest point of the cup rim in the world frame.
pub fn cup_lowest_rim_point(cup: &Pose6, radius: f64, height: f64) -> Vector3<f64> {
    let axis = cup.z_axis();
    let center = cup.transform_point(&Vector3::new(0.0, 0.0, height));
    let down = -Vector3::z();
    let radial = down - axis * axis.dot(&down);
    let n = radial.norm();
    if n < 1e-12 {
        // upright or upside down: every rim point is equally low
        return center + cup.x_axis() * radius;
    }
    center + radial * (radius / n)
}

pub fn cup_rim_center(cup: &Pose6, height: f64) -> Vector3<f64> {
    cup.transform_point(&Vector3::new(0.0, 0.0, height))
}

/// Advances every particle by `dt`.
///
/// Held particles ride the utensil and leave it once the tilt exceeds their
/// release angle; spoon particles drop where they are, cup particles pour
/// from the lowest rim point. Free particles fall under gravity
/// (semi-implicit Euler). A free particle whose path passes within the mouth
/// radius is captured; one that falls more than `spill_drop` below the
/// utensil is spilled. Captured and spilled are final.
pub fn step_particles(
    particles: &mut [Particle],
    utensil: &Pose6,
    tool: Tool,
    mouth: &Vector3<f64>,
    cfg: &ParticleConfig,
    dt: f64,
) -> ParticleEvents {
    let mut ev = ParticleEvents::default();
    let tilt = tilt_deg(utensil);
    let floor = utensil.position.z - cfg.spill_drop;
    let g = Vector3::new(0.0, 0.0, -cfg.gravity);
    for p in particles.iter_mut() {
        if p.status == ParticleStatus::Held {
            p.position = utensil.transform_point(&p.local);
            if tilt > p.release_tilt_deg {
                p.status = ParticleStatus::Free;
                p.velocity = Vector3::zeros();
                if tool == Tool::Cup {
                    p.position = cup_lowest_rim_point(utensil, cfg.cup_radius, cfg.cup_height);
                }
                ev.released += 1;
            } else {
                if tool == Tool::Spoon
                    && cfg.spoon_mouth_capture
                    && (p.position - mouth).norm() <= cfg.mouth_radius
                {
                    p.status = ParticleStatus::Captured;
                    ev.captured += 1;
                }
                continue;
            }
        }
        if p.status == ParticleStatus::Free {
            let old = p.position;
            p.velocity += g * dt;
            p.position += p.velocity * dt;
            if point_segment_distance(mouth, &old, &p.position) <= cfg.mouth_radius {
                p.status = ParticleStatus::Captured;
                ev.captured += 1;
            } else if p.position.z < floor {
                p.status = ParticleStatus::Spilled;
                ev.spilled += 1;
            }
        }
    }
    ev
}

/// A marker or itch attached to the right arm surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSite {
    pub anchor: ArmSurfacePoint,
    pub position: Vector3<f64>,
    /// Outward surface normal.
    pub normal: Vector3<f64>,
}

impl SurfaceSite {
    fn new(human: &HumanState, anchor: ArmSurfacePoint) -> Self {
        let (position, normal) = human.surface_point(&anchor);
        Self { anchor, position, normal }
    }

    fn refresh(&mut self, human: &HumanState) {
        let (p, n) = human.surface_point(&self.anchor);
        self.position = p;
        self.normal = n;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub site: SurfaceSite,
    pub wiped: bool,
}

/// Marker anchors: rows at fixed angles around the arm, `spacing` apart along
/// the arm axis, continuing from the upper arm onto the forearm.
pub fn marker_anchors(body: &Anthropometrics, cfg: &crate::config::BathingConfig) -> Vec<ArmSurfacePoint> {
    let rows = cfg.row_angles.len().max(1);
    let per_row = cfg.marker_count.div_ceil(rows);
    let mut out = Vec::with_capacity(cfg.marker_count);
    'rows: for &angle in &cfg.row_angles {
        for k in 0..per_row {
            if out.len() == cfg.marker_count {
                break 'rows;
            }
            let s = cfg.marker_start + k as f64 * cfg.marker_spacing;
            let (segment, axial) = if s <= body.upper_arm {
                (ArmSegment::Upper, s)
            } else {
                (ArmSegment::Fore, (s - body.upper_arm).min(body.forearm))
            };
            out.push(ArmSurfacePoint { side: Side::Right, segment, axial, angle });
        }
    }
    out
}

/// Uniform point on the right arm surface: segment picked by lateral area,
/// then uniform position along the axis and angle around it.
pub fn sample_itch<R: Rng + ?Sized>(rng: &mut R, body: &Anthropometrics) -> ArmSurfacePoint {
    let upper = body.radii.upper_arm * body.upper_arm;
    let fore = body.radii.forearm * body.forearm;
    let pick: f64 = rng.random();
    let segment = if pick * (upper + fore) < upper { ArmSegment::Upper } else { ArmSegment::Fore };
    let len = match segment {
        ArmSegment::Upper => body.upper_arm,
        ArmSegment::Fore => body.forearm,
    };
    let axial = rng.random_range(0.0..len);
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    ArmSurfacePoint { side: Side::Right, segment, axial, angle }
}

/// Counts compared against the success thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub captured: usize,
    pub particles: usize,
    pub scratches: u32,
    pub wiped: usize,
    pub markers: usize,
}

/// Threshold test; fractions are inclusive.
pub fn meets_success(task: Task, cfg: &SuccessConfig, p: &TaskProgress) -> bool {
    let frac = |n: usize, total: usize, f: f64| total > 0 && n as f64 + 1e-9 >= f * total as f64;
    match task {
        Task::Feeding => frac(p.captured, p.particles, cfg.feeding_fraction),
        Task::Drinking => frac(p.captured, p.particles, cfg.drinking_fraction),
        Task::Scratching => p.scratches >= cfg.scratch_count,
        Task::Bathing => frac(p.wiped, p.markers, cfg.bathing_fraction),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvSpec {
    pub task: Task,
    pub robot: RobotProfileId,
    pub biomech: BiomechMode,
    pub source: HumanSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvState {
    pub spec: EnvSpec,
    pub human: HumanState,
    pub robot: RobotState,
    pub particles: Vec<Particle>,
    pub markers: Vec<Marker>,
    pub itch: Option<SurfaceSite>,
    pub scratch_count: u32,
    pub t: u32,
    pub cumulative_reward: f64,
    /// Contact force magnitude after the last step (N).
    pub force: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub captured: u32,
    pub spilled: u32,
    pub released: u32,
    pub scratched: bool,
    pub wiped: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub force: f64,
    pub force_cap: f64,
    /// Tool-to-target distance used for shaping (m).
    pub distance: f64,
    pub events: StepEvents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Seated or lying human at the task's furniture, arms at rest.
pub fn initial_human(cfg: &LabConfig, task: Task, body: Anthropometrics, waist: [f64; 3]) -> HumanState {
    let h = &cfg.env.human;
    if task.in_bed() {
        // supine: spine along −x, face up
        let furniture = Pose6::new(
            Vector3::from(h.bed_waist),
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -std::f64::consts::FRAC_PI_2),
        );
        let mut s = HumanState::new(body, furniture, waist);
        s.right_arm = h.bed_arm_rest;
        s.left_arm = mirror_arm(&h.bed_arm_rest);
        s.clamp_to_limits();
        s
    } else {
        HumanState::new(body, Pose6::new(Vector3::from(h.seat_waist), UnitQuaternion::identity()), waist)
    }
}

/// One episode of one task.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: Arc<LabConfig>,
    state: EnvState,
}

impl Env {
    /// Samples a human (sex 50/50, body from the biomechanics mode, static
    /// pose for sampled humans) and places robot, particles and markers.
    pub fn reset<R: Rng + ?Sized>(cfg: Arc<LabConfig>, spec: EnvSpec, rng: &mut R) -> (Env, Vec<f64>) {
        let sex = if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
        let (body, waist) = sample_biomechanics(rng, sex, spec.biomech);
        let mut human = initial_human(&cfg, spec.task, body, waist);
        if spec.source == HumanSource::StaticSampled {
            let h = &cfg.env.human;
            match spec.task {
                Task::Feeding | Task::Drinking => {
                    for v in &mut human.head {
                        *v = rng.random_range(-h.head_range..=h.head_range);
                    }
                }
                Task::Scratching | Task::Bathing => {
                    for (q, r) in human.right_arm.iter_mut().zip(h.arm_range) {
                        *q += rng.random_range(-r..=r);
                    }
                }
            }
            human.clamp_to_limits();
        }
        Self::with_human(cfg, spec, human, rng)
    }

    /// Builds an episode around a given human.
    pub fn with_human<R: Rng + ?Sized>(
        cfg: Arc<LabConfig>,
        spec: EnvSpec,
        human: HumanState,
        rng: &mut R,
    ) -> (Env, Vec<f64>) {
        let profile = cfg.robot(spec.robot);
        let tool = spec.task.tool();
        let placement = &profile.tasks[&spec.task];
        let robot = RobotState::new(
            spec.robot,
            &profile.chain,
            placement.base,
            tool,
            profile.tools[&tool],
            placement.home_q,
        );
        let utensil = robot.tool_pose();
        let pc = &cfg.env.particles;
        let particles = match spec.task {
            Task::Feeding => spoon_particles(pc)
                .into_iter()
                .map(|l| Particle::held(l, pc.spoon_release_deg, &utensil))
                .collect(),
            Task::Drinking => cup_particles(pc)
                .into_iter()
                .map(|l| {
                    let frac = (l.z / pc.cup_height).clamp(0.0, 1.0);
                    let tilt = pc.cup_pour_full_deg - (pc.cup_pour_full_deg - pc.cup_pour_start_deg) * frac;
                    Particle::held(l, tilt, &utensil)
                })
                .collect(),
            _ => Vec::new(),
        };
        let markers = if spec.task == Task::Bathing {
            marker_anchors(&human.body, &cfg.env.bathing)
                .into_iter()
                .map(|a| Marker { site: SurfaceSite::new(&human, a), wiped: false })
                .collect()
        } else {
            Vec::new()
        };
        let itch = (spec.task == Task::Scratching).then(|| SurfaceSite::new(&human, sample_itch(rng, &human.body)));
        let mut env = Env {
            cfg,
            state: EnvState {
                spec,
                human,
                robot,
                particles,
                markers,
                itch,
                scratch_count: 0,
                t: 0,
                cumulative_reward: 0.0,
                force: 0.0,
            },
        };
        env.state.force = env.contact().0;
        let obs = env.observation();
        (env, obs)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn config(&self) -> &LabConfig {
        &self.cfg
    }

    pub fn spec(&self) -> EnvSpec {
        self.state.spec
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.cfg.env.episode.steps
    }

    /// Replaces the human pose (live input). Surface sites follow the arm.
    pub fn set_human(&mut self, human: HumanState) {
        self.state.human = human;
        let h = &self.state.human;
        for m in &mut self.state.markers {
            m.site.refresh(h);
        }
        if let Some(itch) = &mut self.state.itch {
            itch.refresh(h);
        }
    }

    pub fn mouth(&self) -> Vector3<f64> {
        self.state.human.mouth()
    }

    pub fn tool_pose(&self) -> Pose6 {
        self.state.robot.tool_pose()
    }

    fn contact(&self) -> (f64, f64) {
        let tool = self.tool_pose().position;
        let f = contact_force(&tool, &self.state.human.capsules(), self.cfg.env.robot.stiffness);
        let near_itch = self
            .state
            .itch
            .is_some_and(|i| (tool - i.position).norm() <= self.cfg.env.scratching.near_itch_radius);
        let cap = if near_itch { self.cfg.env.reward.itch_force_cap } else { self.cfg.env.reward.force_cap };
        (f.magnitude, cap)
    }

    /// Point the shaping term pulls the tool toward.
    pub fn target(&self) -> Vector3<f64> {
        let tool = self.tool_pose();
        match self.state.spec.task {
            Task::Feeding | Task::Drinking => self.mouth(),
            Task::Scratching => self.state.itch.expect("scratching has an itch").position,
            Task::Bathing => {
                let nearest = |unwiped_only: bool| {
                    self.state
                        .markers
                        .iter()
                        .filter(|m| !unwiped_only || !m.wiped)
                        .map(|m| m.site.position)
                        .min_by(|a, b| (a - tool.position).norm().total_cmp(&(b - tool.position).norm()))
                };
                nearest(true).or_else(|| nearest(false)).unwrap_or(tool.position)
            }
        }
    }

    /// Tool-side reference point for the shaping distance.
    fn reference_point(&self) -> Vector3<f64> {
        let tool = self.tool_pose();
        match self.state.spec.task {
            Task::Drinking => cup_rim_center(&tool, self.cfg.env.particles.cup_height),
            _ => tool.position,
        }
    }

    pub fn distance(&self) -> f64 {
        if self.state.spec.task == Task::Bathing && self.state.markers.iter().all(|m| m.wiped) {
            return 0.0;
        }
        (self.reference_point() - self.target()).norm()
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        let tool = self.tool_pose();
        let mut o = Vec::with_capacity(s.spec.task.obs_dim());
        o.extend_from_slice(&s.robot.q);
        o.extend(tool.position.iter());
        o.extend_from_slice(&tool.canonical_quat_xyzw());
        o.push(s.force);
        match s.spec.task {
            Task::Feeding | Task::Drinking => {
                let head = s.human.head_frame();
                o.extend(head.position.iter());
                let (r, p, y) = head.orientation.euler_angles();
                o.extend_from_slice(&[r, p, y]);
            }
            Task::Scratching | Task::Bathing => {
                let [sh, el, wr, _] = s.human.arm_points(Side::Right);
                for v in [sh, el, wr, self.target()] {
                    o.extend(v.iter());
                }
            }
        }
        debug_assert_eq!(o.len(), s.spec.task.obs_dim());
        o
    }

    pub fn progress(&self) -> TaskProgress {
        let c = ParticleCounts::of(&self.state.particles);
        TaskProgress {
            captured: c.captured,
            particles: c.total(),
            scratches: self.state.scratch_count,
            wiped: self.state.markers.iter().filter(|m| m.wiped).count(),
            markers: self.state.markers.len(),
        }
    }

    /// Success flag, available once the episode is over.
    pub fn success(&self) -> Result<bool, EnvError> {
        if !self.done() {
            return Err(EnvError::EpisodeNotFinished { t: self.state.t, steps: self.cfg.env.episode.steps });
        }
        Ok(meets_success(self.state.spec.task, &self.cfg.env.success, &self.progress()))
    }

    /// Largest per-step reward magnitude this episode can produce.
    pub fn reward_bound(&self) -> f64 {
        let r = &self.cfg.env.reward;
        let s = &self.state;
        let reach: f64 = s.robot.chain.links().iter().map(|l| l.offset.position.norm()).sum::<f64>()
            + s.robot.chain.ee_offset().position.norm()
            + s.robot.tool_offset.position.norm()
            + self.cfg.env.particles.cup_height;
        // every avatar point lies within 2 m of the waist center
        let d_max = reach + (s.robot.base.position - s.human.waist_center()).norm() + 2.0;
        let b = s.human.body.radii;
        let max_radius = [b.torso, b.head, b.upper_arm, b.forearm, b.hand].into_iter().fold(0.0, f64::max);
        let n_particles = s.particles.len() as f64;
        r.distance_weight * d_max
            + (r.capture_bonus + r.spill_penalty) * n_particles
            + r.tilt_weight
            + r.scratch_bonus
            + r.wipe_bonus * s.markers.len() as f64
            + r.force_weight * self.cfg.env.robot.stiffness * max_radius
    }

    pub fn step(&mut self, action: &Action) -> Result<Transition, EnvError> {
        if self.done() {
            return Err(EnvError::EpisodeFinished(self.state.t));
        }
        let cfg = Arc::clone(&self.cfg);
        let env_cfg = &cfg.env;
        let prev_tool = self.tool_pose();
        self.state.robot = apply_action(&self.state.robot, action, env_cfg.robot.max_delta);
        let tool = self.tool_pose();
        let mouth = self.mouth();
        let mut events = StepEvents::default();

        match self.state.spec.task {
            Task::Feeding | Task::Drinking => {
                let pe = step_particles(
                    &mut self.state.particles,
                    &tool,
                    self.state.robot.tool,
                    &mouth,
                    &env_cfg.particles,
                    env_cfg.episode.dt,
                );
                events.captured = pe.captured;
                events.spilled = pe.spilled;
                events.released = pe.released;
            }
            Task::Scratching => {
                let itch = self.state.itch.expect("scratching has an itch");
                let sc = &env_cfg.scratching;
                let delta = tool.position - prev_tool.position;
                let tangential = delta - itch.normal * delta.dot(&itch.normal);
                if (tool.position - itch.position).norm() <= sc.radius && tangential.norm() >= sc.min_tangential {
                    events.scratched = true;
                    self.state.scratch_count += 1;
                }
            }
            Task::Bathing => {
                let b = &env_cfg.bathing;
                let cos_max = b.wipe_max_angle_deg.to_radians().cos();
                let up = tool.z_axis();
                for m in &mut self.state.markers {
                    if !m.wiped
                        && (tool.position - m.site.position).norm() <= b.wipe_radius
                        && up.dot(&m.site.normal) >= cos_max
                    {
                        m.wiped = true;
                        events.wiped += 1;
                    }
                }
            }
        }

        let (force, cap) = self.contact();
        self.state.force = force;
        let distance = self.distance();
        let r = &env_cfg.reward;
        let mut reward = -r.distance_weight * distance
            + r.capture_bonus * f64::from(events.captured)
            - r.spill_penalty * f64::from(events.spilled)
            + if events.scratched { r.scratch_bonus } else { 0.0 }
            + r.wipe_bonus * f64::from(events.wiped)
            - r.force_weight * (force - cap).max(0.0);
        if self.state.spec.task == Task::Drinking {
            let rim = cup_rim_center(&tool, env_cfg.particles.cup_height);
            if (rim - mouth).norm() <= r.tilt_gate {
                reward += r.tilt_weight * (tilt_deg(&tool) / r.tilt_full_deg).clamp(0.0, 1.0);
            }
        }

        self.state.t += 1;
        self.state.cumulative_reward += reward;
        Ok(Transition {
            observation: self.observation(),
            reward,
            done: self.done(),
            info: StepInfo { force, force_cap: cap, distance, events },
        })
    }
}

/// Food resting on the spoon bowl: two rows of four.
fn spoon_particles(cfg: &ParticleConfig) -> Vec<Vector3<f64>> {
    let cols = cfg.food_count.div_ceil(2).max(1);
    (0..cfg.food_count)
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let x = (col as f64 - (cols as f64 - 1.0) / 2.0) * 0.01;
            let y = if row == 0 { -0.006 } else { 0.006 };
            Vector3::new(x, y, 0.01)
        })
        .collect()
}

/// Water filling the cup in layers of ten: a center particle plus a ring.
fn cup_particles(cfg: &ParticleConfig) -> Vec<Vector3<f64>> {
    const PER_LAYER: usize = 10;
    let layers = cfg.water_count.div_ceil(PER_LAYER).max(1);
    let margin = 0.01;
    let dz = if layers > 1 { (cfg.cup_height - 2.0 * margin) / (layers - 1) as f64 } else { 0.0 };
    let ring = cfg.cup_radius * 0.6;
    (0..cfg.water_count)
        .map(|i| {
            let (layer, k) = (i / PER_LAYER, i % PER_LAYER);
            let z = margin + layer as f64 * dz;
            if k == 0 {
                Vector3::new(0.0, 0.0, z)
            } else {
                let a = (k - 1) as f64 * std::f64::consts::TAU / (PER_LAYER - 1) as f64;
                Vector3::new(ring * a.cos(), ring * a.sin(), z)
            }
        })
        .collect()
}

/// Bounded joint step from `current` toward `goal`, for scripted controllers.
pub fn action_toward(current: &[f64; ROBOT_DOF], goal: &[f64; ROBOT_DOF], max_delta: f64) -> Action {
    let mut a = [0.0; ROBOT_DOF];
    for i in 0..ROBOT_DOF {
        a[i] = (goal[i] - current[i]).clamp(-max_delta, max_delta);
    }
    Action(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;

    fn cfg() -> Arc<LabConfig> {
        Arc::new(LabConfig::shipped())
    }

    fn spec(task: Task) -> EnvSpec {
        EnvSpec { task, robot: RobotProfileId::ArmA, biomech: BiomechMode::Fixed, source: HumanSource::StaticSampled }
    }

    #[test]
    fn observation_lengths() {
        let c = cfg();
        for task in Task::ALL {
            let (_, obs) = Env::reset(c.clone(), spec(task), &mut rng_from_seed(1));
            assert_eq!(obs.len(), task.obs_dim(), "{task}");
        }
    }

    #[test]
    fn gravity_step() {
        let pc = cfg().env.particles.clone();
        let mut ps = [Particle::free(Vector3::new(5.0, 0.0, 1.0), Vector3::zeros())];
        step_particles(&mut ps, &Pose6::identity(), Tool::Spoon, &Vector3::new(-5.0, 0.0, 0.0), &pc, 0.1);
        assert!((ps[0].velocity - Vector3::new(0.0, 0.0, -0.981)).norm() < 1e-12);
    }

    #[test]
    fn particle_at_mouth_is_captured() {
        let pc = cfg().env.particles.clone();
        let mouth = Vector3::new(0.3, 0.2, 1.2);
        let mut ps = [Particle::free(mouth, Vector3::zeros())];
        let ev = step_particles(&mut ps, &Pose6::identity(), Tool::Cup, &mouth, &pc, 0.1);
        assert_eq!(ev.captured, 1);
        assert_eq!(ps[0].status, ParticleStatus::Captured);
    }

    #[test]
    fn success_thresholds() {
        let c = cfg();
        let s = &c.env.success;
        let p = |captured, particles| TaskProgress { captured, particles, ..Default::default() };
        assert!(meets_success(Task::Feeding, s, &p(6, 8)));
        assert!(!meets_success(Task::Feeding, s, &p(5, 8)));
        let sc = |n| TaskProgress { scratches: n, ..Default::default() };
        assert!(meets_success(Task::Scratching, s, &sc(25)));
        assert!(!meets_success(Task::Scratching, s, &sc(24)));
        let w = |wiped, markers| TaskProgress { wiped, markers, ..Default::default() };
        assert!(meets_success(Task::Bathing, s, &w(3, 10)));
        assert!(!meets_success(Task::Bathing, s, &w(2, 10)));
    }
}
