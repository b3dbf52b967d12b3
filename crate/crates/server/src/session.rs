//! One client session as a deterministic state machine. Inbound messages are
//! queued and applied only at tick boundaries, so the outbound stream is a
//! pure function of the seed and the per-tick message batches.

use std::collections::VecDeque;
use std::sync::Arc;

use assistlab_core::avatar::{retarget_frame, Anthropometrics, BiomechMode, Sex, TrackedInput};
use assistlab_core::config::LabConfig;
use assistlab_core::envs::{initial_human, Env, EnvSpec, HumanSource, Task};
use assistlab_core::robot::RobotProfileId;
use assistlab_core::seeding::rng_from_seed;
use assistlab_eval::record::{episode_seed, RECORD_FORMAT_VERSION};
use assistlab_eval::{EpisodeRecord, PolicyMode, QuestionnaireRecord, RecordFooter, RecordHeader, StepRow};

use crate::protocol::{AvatarDefault, ClientMessage, ParticleView, Phase, ServerMessage, PROTOCOL_VERSION};
use crate::registry::PolicyRegistry;
use crate::ServerError;

/// Live humans are retargeted onto the default body.
pub const LIVE_BIOMECH: BiomechMode = BiomechMode::Fixed;

struct LiveEpisode {
    env: Env,
    policy_id: String,
    practice: bool,
    header: RecordHeader,
    rows: Vec<StepRow>,
}

/// Everything a session has produced for persistence.
#[derive(Debug, Default)]
pub struct SessionOutput {
    pub records: Vec<EpisodeRecord>,
    pub questionnaires: Vec<QuestionnaireRecord>,
}

pub struct Session {
    id: String,
    seed: u64,
    tick_ms: u64,
    lab: Arc<LabConfig>,
    policies: Arc<PolicyRegistry>,
    phase: Phase,
    greeted: bool,
    queue: VecDeque<Result<ClientMessage, String>>,
    latest: Option<TrackedInput>,
    fresh: bool,
    rejected_poses: u64,
    episode: Option<LiveEpisode>,
    episodes_started: u64,
    last_trial: Option<u64>,
    output: SessionOutput,
}

impl Session {
    pub fn new(id: impl Into<String>, seed: u64, tick_ms: u64, lab: Arc<LabConfig>, policies: Arc<PolicyRegistry>) -> Self {
        Self {
            id: id.into(),
            seed,
            tick_ms,
            lab,
            policies,
            phase: Phase::Lobby,
            greeted: false,
            queue: VecDeque::new(),
            latest: None,
            fresh: false,
            rejected_poses: 0,
            episode: None,
            episodes_started: 0,
            last_trial: None,
            output: SessionOutput::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn latest_input(&self) -> Option<&TrackedInput> {
        self.latest.as_ref()
    }

    /// Poses refused for a non-increasing timestamp.
    pub fn rejected_poses(&self) -> u64 {
        self.rejected_poses
    }

    pub fn episode_active(&self) -> bool {
        self.episode.is_some()
    }

    /// Steps taken in the running episode.
    pub fn clock(&self) -> Option<u32> {
        self.episode.as_ref().map(|e| e.env.state().t)
    }

    pub fn enqueue(&mut self, msg: ClientMessage) {
        self.queue.push_back(Ok(msg));
    }

    /// Queues raw text; schema errors are reported at the next tick.
    pub fn enqueue_text(&mut self, text: &str) {
        self.queue.push_back(serde_json::from_str(text).map_err(|e| format!("bad message: {e}")));
    }

    /// Takes records and questionnaires produced since the last call.
    pub fn drain_output(&mut self) -> SessionOutput {
        std::mem::take(&mut self.output)
    }

    /// Applies queued messages, then advances a running episode by one step.
    pub fn tick(&mut self) -> Result<Vec<ServerMessage>, ServerError> {
        if self.phase == Phase::Done && self.queue.is_empty() {
            return Err(ServerError::SessionExpired(self.id.clone()));
        }
        let mut out = Vec::new();
        while let Some(msg) = self.queue.pop_front() {
            match msg {
                Ok(m) => out.extend(self.handle_message(m)?),
                Err(message) => out.push(self.error(message)),
            }
        }
        if self.episode.is_some() {
            out.extend(self.step()?);
        }
        Ok(out)
    }

    fn error(&self, message: impl Into<String>) -> ServerMessage {
        ServerMessage::Error { sid: self.id.clone(), message: message.into() }
    }

    /// Applies one message immediately. Rejected messages leave the session
    /// unchanged and produce an error message.
    pub fn handle_message(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>, ServerError> {
        if !matches!(msg, ClientMessage::Hello { .. }) && msg.sid() != self.id {
            return Ok(vec![self.error(format!("session id {:?} does not match {:?}", msg.sid(), self.id))]);
        }
        if self.phase == Phase::Done {
            return Ok(vec![self.error(format!("session finished; {} ignored", msg.kind()))]);
        }
        match msg {
            ClientMessage::Hello { version, .. } => {
                if self.greeted {
                    return Ok(vec![self.error("hello already received")]);
                }
                if version != PROTOCOL_VERSION {
                    return Ok(vec![self.error(format!(
                        "protocol version {version} is not supported (server speaks {PROTOCOL_VERSION})"
                    ))]);
                }
                self.greeted = true;
                Ok(vec![self.config()])
            }
            ClientMessage::Start { task, robot, policy, practice, .. } => self.start(task, robot, &policy, practice),
            ClientMessage::Pose { t, head, left, right, .. } => {
                if !matches!(self.phase, Phase::Lobby | Phase::Practice | Phase::Trial) {
                    return Ok(vec![self.error(format!("pose not accepted in phase {:?}", self.phase))]);
                }
                if let Some(prev) = &self.latest {
                    if !(t > prev.t) {
                        self.rejected_poses += 1;
                        return Ok(vec![self.error(format!("pose timestamp {t} does not follow {}", prev.t))]);
                    }
                }
                if !t.is_finite() {
                    self.rejected_poses += 1;
                    return Ok(vec![self.error("pose timestamp is not finite")]);
                }
                self.latest = Some(TrackedInput { t, head, left, right });
                self.fresh = true;
                Ok(vec![])
            }
            ClientMessage::Questionnaire { l1, l2, l3, l4, .. } => {
                if self.phase != Phase::Questionnaire {
                    return Ok(vec![self.error(format!("questionnaire not accepted in phase {:?}", self.phase))]);
                }
                let trial = self.last_trial.expect("questionnaire phase follows a trial");
                let rec = QuestionnaireRecord {
                    session_id: self.id.clone(),
                    trial_id: trial_id(&self.id, trial),
                    l1,
                    l2,
                    l3,
                    l4,
                };
                if let Err(e) = rec.validate() {
                    return Ok(vec![self.error(e.to_string())]);
                }
                self.output.questionnaires.push(rec);
                self.phase = Phase::Done;
                Ok(vec![])
            }
            ClientMessage::Stop { .. } => {
                // an aborted episode is not a completed trial and leaves no record
                self.episode = None;
                self.phase = Phase::Done;
                Ok(vec![])
            }
        }
    }

    fn config(&self) -> ServerMessage {
        let avatars = Task::ALL
            .into_iter()
            .map(|task| AvatarDefault {
                task,
                human: initial_human(&self.lab, task, Anthropometrics::default_for(Sex::Male), [0.0; 3]),
            })
            .collect();
        ServerMessage::Config {
            sid: self.id.clone(),
            version: PROTOCOL_VERSION,
            tasks: Task::ALL.to_vec(),
            robots: RobotProfileId::ALL.to_vec(),
            policies: self.policies.infos(),
            steps: self.lab.env.episode.steps,
            tick_ms: self.tick_ms,
            avatars,
        }
    }

    fn start(
        &mut self,
        task: Task,
        robot: RobotProfileId,
        policy_id: &str,
        practice: bool,
    ) -> Result<Vec<ServerMessage>, ServerError> {
        if !self.greeted {
            return Ok(vec![self.error("hello required before start")]);
        }
        if !matches!(self.phase, Phase::Lobby | Phase::Practice) || self.episode.is_some() {
            return Ok(vec![self.error(format!("start not accepted in phase {:?}", self.phase))]);
        }
        let Some(net) = self.policies.get(policy_id) else {
            return Ok(vec![self.error(format!("unknown policy {policy_id:?}"))]);
        };
        if net.task != task || net.robot != robot {
            return Ok(vec![self.error(format!(
                "policy {policy_id:?} is for {}/{}, not {task}/{robot}",
                net.task, net.robot
            ))]);
        }
        let index = self.episodes_started;
        let header = RecordHeader {
            format_version: RECORD_FORMAT_VERSION,
            config_hash: self.lab.hash().to_owned(),
            base_seed: self.seed,
            episode: index,
            task,
            robot,
            policy_id: policy_id.to_owned(),
            policy_mode: PolicyMode::of_training(net.biomech),
            biomech: LIVE_BIOMECH,
            human_source: HumanSource::Live,
        };
        let spec = EnvSpec { task, robot, biomech: LIVE_BIOMECH, source: HumanSource::Live };
        let mut rng = rng_from_seed(episode_seed(self.seed, index));
        let (env, _) = Env::reset(Arc::clone(&self.lab), spec, &mut rng);
        self.episodes_started += 1;
        self.fresh = self.latest.is_some();
        self.episode = Some(LiveEpisode {
            env,
            policy_id: policy_id.to_owned(),
            practice,
            header,
            rows: Vec::with_capacity(self.lab.env.episode.steps as usize),
        });
        self.phase = if practice { Phase::Practice } else { Phase::Trial };
        Ok(vec![])
    }

    /// Retargets fresh input (holding the last pose otherwise), acts with the
    /// policy mean and steps once.
    fn step(&mut self) -> Result<Vec<ServerMessage>, ServerError> {
        let ep = self.episode.as_mut().expect("step requires an episode");
        if self.fresh {
            if let Some(input) = &self.latest {
                let (human, _flags) = retarget_frame(&ep.env.state().human, input, &self.lab.env.ik);
                ep.env.set_human(human);
            }
            self.fresh = false;
        }
        let net = self.policies.get(&ep.policy_id).expect("policy checked at start");
        let human = ep.env.state().human.joints();
        let obs = ep.env.observation();
        let action = net.act_mean(&obs)?;
        let t = ep.env.state().t;
        let tr = ep.env.step(&action)?;
        ep.rows.push(StepRow {
            t,
            obs,
            action: action.0,
            reward: tr.reward,
            force: tr.info.force,
            events: tr.info.events,
            human: Some(human),
        });
        let s = ep.env.state();
        let mut out = vec![ServerMessage::State {
            sid: self.id.clone(),
            phase: self.phase,
            t: s.t,
            human: s.human.joints(),
            robot: s.robot.q,
            tool: ep.env.tool_pose(),
            particles: s.particles.iter().map(|p| ParticleView { p: p.position.into(), status: p.status }).collect(),
            markers: s.markers.iter().map(|m| m.wiped).collect(),
            reward: tr.reward,
            cumulative: s.cumulative_reward,
            force: tr.info.force,
        }];
        if tr.done {
            out.push(self.finish()?);
        }
        Ok(out)
    }

    fn finish(&mut self) -> Result<ServerMessage, ServerError> {
        let ep = self.episode.take().expect("finish requires an episode");
        let success = ep.env.success()?;
        let cumulative: f64 = ep.rows.iter().map(|r| r.reward).sum();
        let trial = ep.header.episode;
        let steps = ep.rows.len() as u32;
        if !ep.practice {
            self.output.records.push(EpisodeRecord {
                header: ep.header,
                rows: ep.rows,
                footer: RecordFooter { cumulative_reward: cumulative, success },
            });
            self.last_trial = Some(trial);
            self.phase = Phase::Questionnaire;
        }
        Ok(ServerMessage::Result { sid: self.id.clone(), trial, practice: ep.practice, success, cumulative, steps })
    }
}

pub fn trial_id(sid: &str, episode: u64) -> String {
    format!("{sid}-{episode}")
}
