//! Data collection, replay and per-agent updates.

use super::losses::{argmax, incentive_objective, loss_environment, LossConfig, Transition};
use super::net::{Adam, Approximator, Mlp};
use crate::env::{Cell, EnvAction, EnvConfig, EnvError, GameKind, IncentiveKind, Observation, SsdEnv};
use crate::xmeans::xmeans;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("replay buffer holds {have} episodes, need {need}")]
    NotReady { have: usize, need: usize },
    #[error("invalid training config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma_env: f64,
    pub gamma_inc: f64,
    pub lambda_inc: f64,
    pub lambda_homo: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which ε is annealed linearly.
    pub epsilon_anneal_steps: usize,
    /// Episodes per update batch.
    pub batch_episodes: usize,
    pub buffer_capacity: usize,
    /// Updates between target-network copies.
    pub target_period: usize,
    pub k_min: usize,
    pub k_max: usize,
    /// Steps per behaviour-feature window.
    pub feature_window: usize,
    pub hidden: usize,
    /// Decay of the action trace that stands in for recurrent history.
    pub trace_decay: f64,
    /// One update after every this many collected episodes.
    pub train_every: usize,
    /// Ablation: train the incentive Q-function on received incentives too.
    pub incentive_with_received: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma_env: 0.95,
            gamma_inc: 0.995,
            lambda_inc: 1.0,
            lambda_homo: 0.01,
            learning_rate: 1e-4,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_steps: 50_000,
            batch_episodes: 16,
            buffer_capacity: 5000,
            target_period: 200,
            k_min: 2,
            k_max: 4,
            feature_window: 10,
            hidden: 32,
            trace_decay: 0.8,
            train_every: 1,
            incentive_with_received: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str, reason: String| Err(TrainError::Config { field, reason });
        for (field, g) in [("gamma_env", self.gamma_env), ("gamma_inc", self.gamma_inc)] {
            if !(g > 0.0 && g < 1.0) {
                return bad(field, format!("must lie in (0, 1), got {g}"));
            }
        }
        for (field, x) in [("lambda_inc", self.lambda_inc), ("lambda_homo", self.lambda_homo)] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(field, format!("must be finite and nonnegative, got {x}"));
            }
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon_start", "exploration rates must lie in [0, 1]".into());
        }
        if self.batch_episodes == 0 || self.buffer_capacity < self.batch_episodes {
            return bad("buffer_capacity", "must hold at least one batch".into());
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad("k_min", format!("need 1 <= k_min <= k_max, got [{}, {}]", self.k_min, self.k_max));
        }
        if self.feature_window == 0 || self.target_period == 0 || self.train_every == 0 {
            return bad("feature_window", "windows and periods must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.trace_decay) {
            return bad("trace_decay", "must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Exploration rate after `env_steps` environment steps.
    pub fn epsilon_at(&self, env_steps: usize) -> f64 {
        if env_steps >= self.epsilon_anneal_steps {
            return self.epsilon_end;
        }
        let frac = env_steps as f64 / self.epsilon_anneal_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            gamma_env: self.gamma_env,
            gamma_inc: self.gamma_inc,
            incentive_with_received: self.incentive_with_received,
        }
    }
}

const N_ENV_ACTIONS: usize = EnvAction::COUNT;
const ZERO_KIND: usize = 1;

/// Per-cell code: terrain in the low bits, `AGENT_BIT` when another agent stands there.
const AGENT_BIT: u8 = 4;

fn view_codes(obs: &Observation) -> Vec<u8> {
    let centre = obs.side * obs.side / 2;
    obs.cells
        .iter()
        .zip(&obs.agents)
        .enumerate()
        .map(|(k, (cell, agent))| {
            let terrain = match cell {
                Cell::Empty => 0,
                Cell::Apple => 1,
                Cell::Waste => 2,
                Cell::Wall => 3,
            };
            terrain | if agent.is_some() && k != centre { AGENT_BIT } else { 0 }
        })
        .collect()
}

/// Recent own actions: the last one and an exponential trace.
#[derive(Clone, Debug, PartialEq)]
struct History {
    last: Option<usize>,
    trace: [f64; N_ENV_ACTIONS],
}

impl History {
    fn new() -> Self {
        History { last: None, trace: [0.0; N_ENV_ACTIONS] }
    }

    fn push(&mut self, action: usize, decay: f64) {
        for (a, t) in self.trace.iter_mut().enumerate() {
            *t = decay * *t + if a == action { 1.0 - decay } else { 0.0 };
        }
        self.last = Some(action);
    }
}

/// Input features: one-hot wall/apple/waste/agent per view cell, last action,
/// action trace and elapsed fraction of the episode.
fn encode(codes: &[u8], history: &History, step: usize, max_steps: usize) -> Vec<f64> {
    let mut x = vec![0.0; codes.len() * 4 + 2 * N_ENV_ACTIONS + 1];
    for (k, &code) in codes.iter().enumerate() {
        match code & 3 {
            3 => x[4 * k] = 1.0,
            1 => x[4 * k + 1] = 1.0,
            2 => x[4 * k + 2] = 1.0,
            _ => {}
        }
        if code & AGENT_BIT != 0 {
            x[4 * k + 3] = 1.0;
        }
    }
    let base = codes.len() * 4;
    if let Some(a) = history.last {
        x[base + a] = 1.0;
    }
    x[base + N_ENV_ACTIONS..base + 2 * N_ENV_ACTIONS].copy_from_slice(&history.trace);
    x[base + 2 * N_ENV_ACTIONS] = step as f64 / max_steps as f64;
    x
}

pub fn input_size(view_size: usize) -> usize {
    view_size * view_size * 4 + 2 * N_ENV_ACTIONS + 1
}

/// A stored episode, compact enough to keep thousands in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// `views[t][i]`: agent `i`'s view before acting at step `t`.
    pub views: Vec<Vec<Vec<u8>>>,
    pub env_actions: Vec<Vec<usize>>,
    /// `incentives[t][i][j]`: kind index sent from `i` to `j`.
    pub incentives: Vec<Vec<Vec<usize>>>,
    pub env_reward: Vec<Vec<f64>>,
    pub received: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
    /// Per-step behaviour increments: apples eaten, waste cleaned, last-apple harvests.
    pub behaviour: Vec<Vec<[f64; 3]>>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.env_actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.env_actions.is_empty()
    }
}

/// Ring buffer of complete episodes with uniform sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity, episodes: VecDeque::with_capacity(capacity.min(1024)) }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn push(&mut self, episode: EpisodeRecord) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    /// `count` distinct episodes chosen uniformly.
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<&EpisodeRecord>, TrainError> {
        if self.episodes.len() < count {
            return Err(TrainError::NotReady { have: self.episodes.len(), need: count });
        }
        Ok(sample(rng, self.episodes.len(), count).into_iter().map(|k| &self.episodes[k]).collect())
    }
}

/// Binary similarity from behaviour features: agents in the same X-means cluster
/// are similar. When every agent has the same features there is one behaviour
/// class and the matrix is all ones. The diagonal is one by convention.
pub fn env_similarity<R: Rng>(features: &[Vec<f64>], k_min: usize, k_max: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = features.len();
    if features.iter().all(|f| f == &features[0]) {
        return vec![vec![1.0; n]; n];
    }
    let labels = xmeans(features, k_min, k_max, rng).labels;
    (0..n).map(|i| (0..n).map(|j| if labels[i] == labels[j] { 1.0 } else { 0.0 }).collect()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentNets {
    pub env_net: Mlp,
    pub inc_net: Mlp,
    pub theta: Vec<f64>,
    pub theta_target: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_target: Vec<f64>,
    env_opt: Adam,
    inc_opt: Adam,
}

impl AgentNets {
    pub fn new<R: Rng>(inputs: usize, hidden: usize, learning_rate: f64, rng: &mut R) -> Self {
        let hidden: Vec<usize> = if hidden == 0 { vec![] } else { vec![hidden] };
        let env_net = Mlp::new(inputs, &hidden, N_ENV_ACTIONS);
        let inc_net = Mlp::new(inputs + N_ENV_ACTIONS, &hidden, IncentiveKind::COUNT);
        let theta = env_net.init(rng);
        let phi = inc_net.init(rng);
        AgentNets {
            env_opt: Adam::new(env_net.n_params(), learning_rate),
            inc_opt: Adam::new(inc_net.n_params(), learning_rate),
            theta_target: theta.clone(),
            phi_target: phi.clone(),
            env_net,
            inc_net,
            theta,
            phi,
        }
    }
}

/// ε-greedy environment action; ties go to the lowest index.
pub fn select_env_action<A: Approximator, R: Rng>(net: &A, params: &[f64], input: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        rng.gen_range(0..net.n_outputs())
    } else {
        argmax(&net.forward(params, input))
    }
}

/// ε-greedy incentive kind for every other agent, given everyone's environment
/// actions. The agent's own entry is the zero kind.
pub fn select_incentives<A: Approximator, R: Rng>(
    head: &A,
    params: &[f64],
    agent: usize,
    input: &[f64],
    env_actions: &[usize],
    epsilon: f64,
    rng: &mut R,
) -> Vec<usize> {
    let mut kinds = vec![ZERO_KIND; env_actions.len()];
    for (j, kind) in kinds.iter_mut().enumerate() {
        if j == agent {
            continue;
        }
        let explore = rng.gen::<f64>() < epsilon;
        *kind = if explore {
            rng.gen_range(0..IncentiveKind::COUNT)
        } else {
            argmax(&head.forward(params, &super::losses::head_input(input, env_actions[j], N_ENV_ACTIONS)))
        };
    }
    kinds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub env_steps: usize,
    pub epsilon: f64,
    pub collective_return: f64,
    pub returns: Vec<f64>,
    /// Incentives given by all agents, counted per kind (negative, zero, positive).
    pub incentives_given: [usize; 3],
    pub received: Vec<f64>,
    /// Mean incentive received per step by agents that cleaned waste this episode.
    pub cleaner_received: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub update: usize,
    pub env_steps: usize,
    pub loss_env: f64,
    pub loss_inc: f64,
    pub loss_homo: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: Vec<EpisodeMetrics>,
    pub iterations: Vec<IterationMetrics>,
}

#[derive(Clone, Copy)]
enum Exploration {
    /// Follow the annealing schedule, starting at this many environment steps.
    Annealed { from_step: usize },
    Fixed(f64),
}

fn play_episode<R: Rng>(
    agents: &[AgentNets],
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    exploration: Exploration,
    env_seed: u64,
    rng: &mut R,
) -> Result<EpisodeRecord, TrainError> {
    let n = env_cfg.n_agents;
    let (mut env, mut obs) = SsdEnv::reset(env_cfg, env_seed)?;
    let mut histories = vec![History::new(); n];
    let mut record = EpisodeRecord {
        views: Vec::new(),
        env_actions: Vec::new(),
        incentives: Vec::new(),
        env_reward: Vec::new(),
        received: Vec::new(),
        cost: Vec::new(),
        behaviour: Vec::new(),
    };
    let max_steps = env_cfg.max_steps;
    let mut t = 0;
    loop {
        let codes: Vec<Vec<u8>> = obs.iter().map(view_codes).collect();
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| encode(&codes[i], &histories[i], t, max_steps)).collect();
        let epsilon = match exploration {
            Exploration::Annealed { from_step } => cfg.epsilon_at(from_step + t),
            Exploration::Fixed(e) => e,
        };
        let actions: Vec<usize> =
            agents.iter().zip(&inputs).map(|(a, x)| select_env_action(&a.env_net, &a.theta, x, epsilon, rng)).collect();
        let kinds: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let a = &agents[i];
                select_incentives(&a.inc_net, &a.phi, i, &inputs[i], &actions, epsilon, rng)
            })
            .collect();
        let env_actions: Vec<EnvAction> = actions.iter().map(|&a| EnvAction::from_index(a).unwrap()).collect();
        let inc: Vec<Vec<IncentiveKind>> =
            kinds.iter().map(|row| row.iter().map(|&k| IncentiveKind::from_index(k).unwrap()).collect()).collect();
        let before: Vec<[u64; 3]> =
            (0..n).map(|i| [env.apples_eaten()[i], env.waste_cleaned()[i], env.last_apples_eaten()[i]]).collect();
        let out = env.step(&env_actions, &inc)?;
        let behaviour = (0..n)
            .map(|i| {
                let now = [env.apples_eaten()[i], env.waste_cleaned()[i], env.last_apples_eaten()[i]];
                [0, 1, 2].map(|c| (now[c] - before[i][c]) as f64)
            })
            .collect();
        for (h, &a) in histories.iter_mut().zip(&actions) {
            h.push(a, cfg.trace_decay);
        }
        record.views.push(codes);
        record.env_actions.push(actions);
        record.incentives.push(kinds);
        record.env_reward.push(out.rewards.env);
        record.received.push(out.rewards.received);
        record.cost.push(out.rewards.cost);
        record.behaviour.push(behaviour);
        t += 1;
        obs = out.observations;
        if out.done {
            return Ok(record);
        }
    }
}

pub struct Trainer {
    env_cfg: EnvConfig,
    cfg: TrainConfig,
    pub agents: Vec<AgentNets>,
    buffer: ReplayBuffer,
    env_steps: usize,
    episodes: usize,
    updates: usize,
    act_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    cluster_rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trainer {
    pub fn new(env_cfg: &EnvConfig, cfg: &TrainConfig) -> Result<Self, TrainError> {
        env_cfg.validate()?;
        cfg.validate()?;
        let mut init_rng = stream(cfg.seed, 4);
        let inputs = input_size(env_cfg.view_size);
        let agents = (0..env_cfg.n_agents)
            .map(|_| AgentNets::new(inputs, cfg.hidden, cfg.learning_rate, &mut init_rng))
            .collect();
        Ok(Trainer {
            env_cfg: env_cfg.clone(),
            cfg: cfg.clone(),
            agents,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            env_steps: 0,
            episodes: 0,
            updates: 0,
            act_rng: stream(cfg.seed, 0),
            env_rng: stream(cfg.seed, 1),
            replay_rng: stream(cfg.seed, 2),
            cluster_rng: stream(cfg.seed, 3),
        })
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon_at(self.env_steps)
    }

    /// Plays one episode with ε-greedy actions and stores it.
    pub fn collect_episode(&mut self) -> Result<EpisodeMetrics, TrainError> {
        let seed = self.env_rng.gen::<u64>();
        let epsilon = self.epsilon();
        let schedule = Exploration::Annealed { from_step: self.env_steps };
        let record = play_episode(&self.agents, &self.env_cfg, &self.cfg, schedule, seed, &mut self.act_rng)?;
        self.env_steps += record.len();
        let metrics = self.episode_metrics(&record, epsilon);
        self.buffer.push(record);
        self.episodes += 1;
        Ok(metrics)
    }

    /// Plays one episode at a fixed exploration rate with a caller-owned stream.
    /// Nothing is stored and the training counters do not move.
    pub fn evaluate_episode<R: Rng>(&self, epsilon: f64, env_seed: u64, rng: &mut R) -> Result<EpisodeMetrics, TrainError> {
        let record = play_episode(&self.agents, &self.env_cfg, &self.cfg, Exploration::Fixed(epsilon), env_seed, rng)?;
        Ok(self.episode_metrics(&record, epsilon))
    }

    fn episode_metrics(&self, record: &EpisodeRecord, epsilon: f64) -> EpisodeMetrics {
        let n = self.env_cfg.n_agents;
        let steps = record.len();
        let returns: Vec<f64> = (0..n).map(|i| record.env_reward.iter().map(|r| r[i]).sum()).collect();
        let received: Vec<f64> = (0..n).map(|i| record.received.iter().map(|r| r[i]).sum()).collect();
        let mut given = [0usize; 3];
        for step in &record.incentives {
            for (i, row) in step.iter().enumerate() {
                for (j, &k) in row.iter().enumerate() {
                    if i != j {
                        given[k] += 1;
                    }
                }
            }
        }
        let cleaners: Vec<usize> =
            (0..n).filter(|&i| record.behaviour.iter().map(|b| b[i][1]).sum::<f64>() > 0.0).collect();
        let cleaner_received = (!cleaners.is_empty() && self.env_cfg.game == GameKind::Cleanup)
            .then(|| cleaners.iter().map(|&i| received[i]).sum::<f64>() / (cleaners.len() * steps) as f64);
        EpisodeMetrics {
            episode: self.episodes,
            env_steps: self.env_steps,
            epsilon,
            collective_return: returns.iter().sum(),
            returns,
            incentives_given: given,
            received,
            cleaner_received,
        }
    }

    /// Behaviour features used for similarity: apples eaten plus waste cleaned in
    /// Cleanup, apples eaten plus last-apple harvests in Harvest.
    fn window_features(&self, record: &EpisodeRecord, start: usize, end: usize) -> Vec<Vec<f64>> {
        let second = if self.env_cfg.game == GameKind::Cleanup { 1 } else { 2 };
        (0..self.env_cfg.n_agents)
            .map(|i| {
                let mut f = vec![0.0; 2];
                for b in &record.behaviour[start..end] {
                    f[0] += b[i][0];
                    f[1] += b[i][second];
                }
                f
            })
            .collect()
    }

    /// All agents' transitions from one episode, with similarity per window.
    fn transitions(&mut self, record: &EpisodeRecord) -> Vec<Vec<Transition>> {
        let n = self.env_cfg.n_agents;
        let steps = record.len();
        let window = self.cfg.feature_window;
        let similarity: Vec<Vec<Vec<f64>>> = if self.cfg.lambda_homo > 0.0 {
            (0..steps.div_ceil(window))
                .map(|w| {
                    let f = self.window_features(record, w * window, ((w + 1) * window).min(steps));
                    env_similarity(&f, self.cfg.k_min, self.cfg.k_max, &mut self.cluster_rng)
                })
                .collect()
        } else {
            vec![vec![vec![0.0; n]; n]; steps.div_ceil(window)]
        };
        let mut per_agent = vec![Vec::with_capacity(steps); n];
        for (i, out) in per_agent.iter_mut().enumerate() {
            let mut history = History::new();
            let mut inputs = Vec::with_capacity(steps);
            for t in 0..steps {
                inputs.push(encode(&record.views[t][i], &history, t, self.env_cfg.max_steps));
                history.push(record.env_actions[t][i], self.cfg.trace_decay);
            }
            for t in 0..steps {
                let last = t + 1 == steps;
                out.push(Transition {
                    agent: i,
                    input: inputs[t].clone(),
                    next_input: (!last).then(|| inputs[t + 1].clone()),
                    env_actions: record.env_actions[t].clone(),
                    next_env_actions: (!last).then(|| record.env_actions[t + 1].clone()),
                    incentives: record.incentives[t].clone(),
                    env_reward: record.env_reward[t][i],
                    received: record.received[t][i],
                    cost: record.cost[t][i],
                    similarity: similarity[t / window][i].clone(),
                });
            }
        }
        per_agent
    }

    /// Samples a batch of episodes and applies one optimizer step per agent.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics, TrainError> {
        let picked: Vec<EpisodeRecord> = self
            .buffer
            .sample(self.cfg.batch_episodes, &mut self.replay_rng)?
            .into_iter()
            .cloned()
            .collect();
        let n = self.env_cfg.n_agents;
        let mut batches: Vec<Vec<Transition>> = vec![Vec::new(); n];
        for record in &picked {
            for (i, ts) in self.transitions(record).into_iter().enumerate() {
                batches[i].extend(ts);
            }
        }
        let loss_cfg = self.cfg.loss_config();
        let (mut l_env, mut l_inc, mut l_homo) = (0.0, 0.0, 0.0);
        for (agent, batch) in self.agents.iter_mut().zip(&batches) {
            let (le, ge) = loss_environment(&agent.env_net, &agent.theta, &agent.theta_target, batch, &loss_cfg);
            agent.env_opt.step(&mut agent.theta, &ge);
            let (li, lh, gi) = incentive_objective(
                &agent.inc_net,
                &agent.phi,
                &agent.phi_target,
                batch,
                &loss_cfg,
                self.cfg.lambda_inc,
                self.cfg.lambda_homo,
            );
            if self.cfg.lambda_inc != 0.0 || self.cfg.lambda_homo != 0.0 {
                agent.inc_opt.step(&mut agent.phi, &gi);
            }
            l_env += le / n as f64;
            l_inc += li / n as f64;
            l_homo += lh / n as f64;
        }
        self.updates += 1;
        if self.updates % self.cfg.target_period == 0 {
            for a in &mut self.agents {
                a.theta_target.clone_from(&a.theta);
                a.phi_target.clone_from(&a.phi);
            }
        }
        Ok(IterationMetrics { update: self.updates, env_steps: self.env_steps, loss_env: l_env, loss_inc: l_inc, loss_homo: l_homo })
    }

    /// Collects episodes until `env_step_budget` is used, training on schedule once
    /// the buffer holds a full batch.
    pub fn run(&mut self, env_step_budget: usize) -> Result<RunSummary, TrainError> {
        let mut summary = RunSummary::default();
        while self.env_steps + self.env_cfg.max_steps <= env_step_budget {
            summary.episodes.push(self.collect_episode()?);
            if self.episodes % self.cfg.train_every == 0 && self.buffer.len() >= self.cfg.batch_episodes {
                summary.iterations.push(self.train_iteration()?);
            }
        }
        Ok(summary)
    }

    /// Parameters of every agent in a flat little-endian blob:
    /// magic, version, then length-prefixed vectors (θ, θ⁻, φ, φ⁻ per agent).
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = b"DLCK".to_vec();
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.agents.len() as u32).to_le_bytes());
        for a in &self.agents {
            for v in [&a.theta, &a.theta_target, &a.phi, &a.phi_target] {
                out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                for x in v.iter() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    /// Restores parameters written by [`Trainer::checkpoint_bytes`].
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), TrainError> {
        let err = |m: &str| TrainError::Checkpoint(m.to_string());
        let mut pos = 0;
        let mut take = |len: usize| -> Result<&[u8], TrainError> {
            let s = bytes.get(pos..pos + len).ok_or_else(|| err("truncated"))?;
            pos += len;
            Ok(s)
        };
        if take(4)? != b"DLCK" {
            return Err(err("bad magic"));
        }
        if u32::from_le_bytes(take(4)?.try_into().unwrap()) != 1 {
            return Err(err("unsupported version"));
        }
        if u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize != self.agents.len() {
            return Err(err("agent count mismatch"));
        }
        let mut vectors = Vec::new();
        for _ in 0..self.agents.len() * 4 {
            let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let raw = take(len * 8)?;
            vectors.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Vec<f64>>());
        }
        for (a, chunk) in self.agents.iter_mut().zip(vectors.chunks_exact(4)) {
            if chunk[0].len() != a.theta.len() || chunk[2].len() != a.phi.len() {
                return Err(err("parameter size mismatch"));
            }
            a.theta.clone_from(&chunk[0]);
            a.theta_target.clone_from(&chunk[1]);
            a.phi.clone_from(&chunk[2]);
            a.phi_target.clone_from(&chunk[3]);
        }
        Ok(())
    }
}
