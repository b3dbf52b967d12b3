//! Dense tanh networks and the policy file format.

use std::path::Path;

use assistlab_core::avatar::BiomechMode;
use assistlab_core::envs::Task;
use assistlab_core::robot::{Action, RobotProfileId, ROBOT_DOF};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::LearnError;

pub const POLICY_FORMAT_VERSION: u32 = 1;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One fully connected layer; `w` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Tanh on every hidden layer, identity on the output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Gaussian fan-in init; the output layer is scaled by `out_gain`.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], out_gain: f64, rng: &mut R) -> Self {
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (i, o) = (dims[l], dims[l + 1]);
                let gain = if l + 1 == n { out_gain } else { 1.0 };
                let normal = Normal::new(0.0, gain / (i as f64).sqrt()).expect("positive std");
                Layer { w: (0..i * o).map(|_| normal.sample(rng)).collect(), b: vec![0.0; o] }
            })
            .collect();
        Self { dims: dims.to_vec(), layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let layers =
            dims.windows(2).map(|d| Layer { w: vec![0.0; d[0] * d[1]], b: vec![0.0; d[1]] }).collect();
        Self { dims: dims.to_vec(), layers }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least one layer")
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = dense(layer, &a, l < last);
        }
        a
    }

    /// Forward pass keeping every layer's activation; `acts[0]` is the input
    /// and `acts[L]` the output.
    pub fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let next = dense(layer, &acts[l], l < last);
            acts.push(next);
        }
    }

    /// Accumulates `∂loss/∂params` into `grad` (flat layout, see
    /// [`Mlp::write_params`]) given `∂loss/∂output`.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], grad: &mut [f64]) {
        let offsets = self.offsets();
        let last = self.layers.len() - 1;
        let mut g = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            if l < last {
                for (gk, ak) in g.iter_mut().zip(&acts[l + 1]) {
                    *gk *= 1.0 - ak * ak;
                }
            }
            let input = &acts[l];
            let (gw, gb) = grad[offsets[l]..offsets[l] + i * o + o].split_at_mut(i * o);
            for r in 0..o {
                let row = &mut gw[r * i..(r + 1) * i];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += g[r] * x;
                }
                gb[r] += g[r];
            }
            if l > 0 {
                let w = &self.layers[l].w;
                let mut prev = vec![0.0; i];
                for r in 0..o {
                    for (c, p) in prev.iter_mut().enumerate() {
                        *p += w[r * i + c] * g[r];
                    }
                }
                g = prev;
            }
        }
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for d in self.dims.windows(2) {
            out.push(at);
            at += d[0] * d[1] + d[1];
        }
        out
    }

    /// Appends parameters layer by layer, weights then biases.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
    }

    /// Reads parameters in [`Mlp::write_params`] order; returns how many were used.
    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.w.len();
            layer.w.copy_from_slice(&src[at..at + nw]);
            at += nw;
            let nb = layer.b.len();
            layer.b.copy_from_slice(&src[at..at + nb]);
            at += nb;
        }
        at
    }

    fn check_shapes(&self) -> Result<(), String> {
        if self.dims.len() < 2 || self.layers.len() != self.dims.len() - 1 {
            return Err(format!("{} layers for dims {:?}", self.layers.len(), self.dims));
        }
        for (l, (layer, d)) in self.layers.iter().zip(self.dims.windows(2)).enumerate() {
            if layer.w.len() != d[0] * d[1] || layer.b.len() != d[1] {
                return Err(format!("layer {l} does not match dims {:?}", d));
            }
            if layer.w.iter().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(format!("layer {l} has non-finite weights"));
            }
        }
        Ok(())
    }
}

fn dense(layer: &Layer, x: &[f64], activate: bool) -> Vec<f64> {
    let i = x.len();
    layer
        .b
        .iter()
        .enumerate()
        .map(|(r, b)| {
            let z = layer.w[r * i..(r + 1) * i].iter().zip(x).fold(*b, |acc, (w, v)| acc + w * v);
            if activate {
                z.tanh()
            } else {
                z
            }
        })
        .collect()
}

/// Running observation mean and variance, merged batch by batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub clip: f64,
}

impl RunningNorm {
    pub fn identity(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], var: vec![1.0; dim], clip: 10.0 }
    }

    /// Standardizes and clips; the identity until the first update.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0.0 {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((v, m), s2)| ((v - m) / (s2 + 1e-8).sqrt()).clamp(-self.clip, self.clip))
            .collect()
    }

    /// Folds a batch of observations into the running statistics.
    pub fn update(&mut self, batch: &[Vec<f64>]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let dim = self.mean.len();
        let mut mean = vec![0.0; dim];
        for x in batch {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for x in batch {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        if self.count == 0.0 {
            self.mean = mean;
            self.var = var;
        } else {
            let total = self.count + n;
            for k in 0..dim {
                let delta = mean[k] - self.mean[k];
                let m2 = self.var[k] * self.count + var[k] * n + delta * delta * self.count * n / total;
                self.mean[k] += delta * n / total;
                self.var[k] = m2 / total;
            }
        }
        self.count += n;
    }
}

/// Actor mean head, critic value head and a state-independent log-std.
///
/// Actions are expressed in units of `action_scale`: the environment receives
/// `action_scale · clamp(u, −1, 1)` per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PolicyNet {
    pub format_version: u32,
    pub task: Task,
    pub robot: RobotProfileId,
    pub biomech: BiomechMode,
    pub obs_dim: usize,
    pub layer_dims: Vec<usize>,
    pub critic_layer_dims: Vec<usize>,
    pub activation: String,
    pub action_scale: f64,
    pub weights: Vec<Layer>,
    pub critic_weights: Vec<Layer>,
    pub log_std: Vec<f64>,
    pub obs_norm: RunningNorm,
    pub training_config_hash: String,
    pub env_config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub value: f64,
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn from_parts(
        task: Task,
        robot: RobotProfileId,
        biomech: BiomechMode,
        actor: Mlp,
        critic: Mlp,
        log_std: Vec<f64>,
        action_scale: f64,
    ) -> Result<Self, LearnError> {
        let obs_dim = actor.input_dim();
        let net = Self {
            format_version: POLICY_FORMAT_VERSION,
            task,
            robot,
            biomech,
            obs_dim,
            layer_dims: actor.dims,
            critic_layer_dims: critic.dims,
            activation: "tanh".into(),
            action_scale,
            weights: actor.layers,
            critic_weights: critic.layers,
            obs_norm: RunningNorm::identity(obs_dim),
            log_std,
            training_config_hash: String::new(),
            env_config_hash: String::new(),
        };
        net.validate()?;
        Ok(net)
    }

    /// Fresh network: `hidden` tanh layers in both towers, small initial
    /// action means and a uniform initial log-std.
    pub fn init<R: Rng + ?Sized>(
        task: Task,
        robot: RobotProfileId,
        biomech: BiomechMode,
        hidden: &[usize],
        init_log_std: f64,
        action_scale: f64,
        rng: &mut R,
    ) -> Self {
        let dims = |out: usize| {
            let mut d = vec![task.obs_dim()];
            d.extend_from_slice(hidden);
            d.push(out);
            d
        };
        let actor = Mlp::init(&dims(ROBOT_DOF), 0.01, rng);
        let critic = Mlp::init(&dims(1), 1.0, rng);
        let log_std = vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); ROBOT_DOF];
        Self::from_parts(task, robot, biomech, actor, critic, log_std, action_scale).expect("consistent shapes")
    }

    pub fn actor(&self) -> Mlp {
        Mlp { dims: self.layer_dims.clone(), layers: self.weights.clone() }
    }

    pub fn critic(&self) -> Mlp {
        Mlp { dims: self.critic_layer_dims.clone(), layers: self.critic_weights.clone() }
    }

    pub fn set_actor(&mut self, m: Mlp) {
        self.weights = m.layers;
    }

    pub fn set_critic(&mut self, m: Mlp) {
        self.critic_weights = m.layers;
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::InvalidPolicy(m));
        if self.format_version != POLICY_FORMAT_VERSION {
            return bad(format!("format version {}", self.format_version));
        }
        if self.activation != "tanh" {
            return bad(format!("activation {:?}", self.activation));
        }
        if self.obs_dim != self.task.obs_dim() {
            return bad(format!("obs dim {} but task {} observes {}", self.obs_dim, self.task, self.task.obs_dim()));
        }
        if self.layer_dims.first() != Some(&self.obs_dim) || self.critic_layer_dims.first() != Some(&self.obs_dim) {
            return bad("layer dims do not start at the obs dim".into());
        }
        if self.layer_dims.last() != Some(&self.log_std.len()) || self.critic_layer_dims.last() != Some(&1) {
            return bad("output dims do not match the action and value heads".into());
        }
        self.actor().check_shapes().or_else(|m| bad(format!("actor: {m}")))?;
        self.critic().check_shapes().or_else(|m| bad(format!("critic: {m}")))?;
        if self.log_std.iter().any(|v| !(LOG_STD_MIN..=LOG_STD_MAX).contains(v)) {
            return bad("log-std outside [-5, 2]".into());
        }
        let n = &self.obs_norm;
        if n.mean.len() != self.obs_dim || n.var.len() != self.obs_dim {
            return bad("obs-norm length".into());
        }
        if n.mean.iter().chain(&n.var).any(|v| !v.is_finite()) || n.var.iter().any(|v| *v < 0.0) {
            return bad("obs-norm statistics".into());
        }
        if !(self.action_scale.is_finite() && self.action_scale > 0.0) {
            return bad("action scale".into());
        }
        Ok(())
    }

    /// Forward pass on an already normalized observation.
    pub fn forward_normalized(&self, obs: &[f64]) -> PolicyOutput {
        let mean = self.actor_forward(obs);
        let value = self.critic_forward(obs);
        PolicyOutput { mean, value, log_std: self.log_std.clone() }
    }

    fn actor_forward(&self, obs: &[f64]) -> Vec<f64> {
        let mut a = obs.to_vec();
        let last = self.weights.len() - 1;
        for (l, layer) in self.weights.iter().enumerate() {
            a = dense(layer, &a, l < last);
        }
        a
    }

    fn critic_forward(&self, obs: &[f64]) -> f64 {
        let mut a = obs.to_vec();
        let last = self.critic_weights.len() - 1;
        for (l, layer) in self.critic_weights.iter().enumerate() {
            a = dense(layer, &a, l < last);
        }
        a[0]
    }

    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        self.obs_norm.normalize(obs)
    }

    /// Deterministic mean action for a raw observation.
    pub fn act_mean(&self, obs: &[f64]) -> Result<Action, LearnError> {
        let out = policy_forward(self, obs)?;
        Ok(self.to_action(&out.mean))
    }

    /// Samples `u ~ N(mean, σ²)`; returns the environment action, `u` and its
    /// log-density.
    pub fn act_sample<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<(Action, Vec<f64>, f64), LearnError> {
        let out = policy_forward(self, obs)?;
        let u: Vec<f64> = out
            .mean
            .iter()
            .zip(&out.log_std)
            .map(|(m, s)| {
                let e: f64 = StandardNormal.sample(rng);
                m + s.exp() * e
            })
            .collect();
        let lp = log_prob(&out.mean, &out.log_std, &u);
        Ok((self.to_action(&u), u, lp))
    }

    pub fn to_action(&self, u: &[f64]) -> Action {
        let mut a = [0.0; ROBOT_DOF];
        for (ai, ui) in a.iter_mut().zip(u) {
            *ai = self.action_scale * ui.clamp(-1.0, 1.0);
        }
        Action(a)
    }

    /// Flat parameter vector: actor, critic, log-std.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.actor().write_params(&mut out);
        self.critic().write_params(&mut out);
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut actor = self.actor();
        let mut critic = self.critic();
        let a = actor.read_params(p);
        let c = critic.read_params(&p[a..]);
        let k = self.log_std.len();
        self.log_std.copy_from_slice(&p[a + c..a + c + k]);
        self.set_actor(actor);
        self.set_critic(critic);
    }

    pub fn param_count(&self) -> usize {
        self.actor().param_count() + self.critic().param_count() + self.log_std.len()
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| LearnError::Io { path: path.to_owned(), source })
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text = std::fs::read_to_string(path).map_err(|source| LearnError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let net: PolicyNet = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}

/// Normalizes a raw observation and evaluates both heads.
pub fn policy_forward(net: &PolicyNet, obs: &[f64]) -> Result<PolicyOutput, LearnError> {
    if obs.len() != net.obs_dim {
        return Err(LearnError::DimensionMismatch { expected: net.obs_dim, got: obs.len() });
    }
    Ok(net.forward_normalized(&net.normalize(obs)))
}

/// Log-density of `u` under a diagonal Gaussian.
pub fn log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(u)
        .map(|((m, s), x)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (1.0 + LN_2PI)).sum()
}
