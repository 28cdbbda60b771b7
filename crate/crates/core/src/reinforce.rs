//! Independent REINFORCE learners on the stateless game.
//!
//! Every agent keeps softmax logits over the variant's strategies. One update
//! plays a batch of games, scores each sampled strategy with its realized reward
//! and moves the logits along the score-function gradient.

use crate::dynamics::{contributing_mass, Trajectory};
use crate::game::{reward_table, sample_row, GameError, GameSpec, OutcomeCounts, PolicyProfile, Variant, C, PUN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    None,
    /// Exponential moving average of each agent's own batch reward.
    RunningMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    /// Number of policy updates.
    pub updates: usize,
    /// Games played per update.
    pub batch: usize,
    pub baseline: Baseline,
    pub seed: u64,
    /// Record the population every this many updates.
    pub snapshot_interval: usize,
    /// Initial row shared by all agents; uniform when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 0.05,
            updates: 20_000,
            batch: 16,
            baseline: Baseline::RunningMean,
            seed: 0,
            snapshot_interval: 50,
            start: None,
        }
    }
}

/// Decay of the running-mean baseline.
const BASELINE_DECAY: f64 = 0.9;

impl LearnerConfig {
    pub fn validate(&self, spec: &GameSpec) -> Result<(), GameError> {
        let bad = |field: &'static str, reason: String| Err(GameError::InvalidSpec { field, reason });
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be finite and nonnegative, got {}", self.learning_rate));
        }
        if self.updates == 0 {
            return bad("updates", "must be at least 1".into());
        }
        if self.batch == 0 {
            return bad("batch", "must be at least 1".into());
        }
        if self.snapshot_interval == 0 {
            return bad("snapshot_interval", "must be at least 1".into());
        }
        if let Some(start) = &self.start {
            if start.len() != spec.arity() || start.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("start", format!("needs {} positive weights", spec.arity()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRecord {
    /// Population points at each snapshot (`trajectory.steps` counts updates).
    pub trajectory: Trajectory,
    /// Cooperation level at each snapshot.
    pub cooperation: Vec<f64>,
    /// Mean realized reward per agent and game over the interval ending at each
    /// snapshot; `None` for the initial snapshot.
    pub mean_reward: Vec<Option<f64>>,
    pub final_profile: PolicyProfile,
}

/// Mean probability mass on contributing strategies.
pub fn cooperation_level(profile: &PolicyProfile) -> f64 {
    contributing_mass(&profile.population_point())
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Swaps the C and P logits of agents on the minority side of the population's
/// C-versus-P mass, each with probability `lambda`.
fn convert_minority<R: Rng>(logits: &mut [f64], probs: &[f64], arity: usize, lambda: f64, rng: &mut R) {
    let (mut total_c, mut total_p) = (0.0, 0.0);
    for row in probs.chunks_exact(arity) {
        total_c += row[C];
        total_p += row[PUN];
    }
    if total_c == total_p {
        return;
    }
    let majority_is_p = total_p > total_c;
    for (z, row) in logits.chunks_exact_mut(arity).zip(probs.chunks_exact(arity)) {
        // Draw for every agent so the stream does not depend on who is in the minority.
        let draw = rng.gen::<f64>();
        let prefers_p = row[PUN] > row[C];
        if row[PUN] != row[C] && prefers_p != majority_is_p && draw < lambda {
            z.swap(C, PUN);
        }
    }
}

pub fn train_population(spec: &GameSpec, cfg: &LearnerConfig) -> Result<LearningRecord, GameError> {
    spec.validate()?;
    cfg.validate(spec)?;
    let (n, arity) = (spec.n, spec.arity());
    let start_logits: Vec<f64> = match &cfg.start {
        Some(w) => w.iter().map(|x| x.ln()).collect(),
        None => vec![0.0; arity],
    };
    let mut logits = start_logits.repeat(n);
    let mut probs = vec![0.0; n * arity];
    let mut grad = vec![0.0; n * arity];
    let mut baseline = vec![0.0; n];
    let mut baseline_ready = false;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut choices = vec![0usize; n];
    let mut rewards = vec![0.0; n];
    let mut batch_choices = vec![0usize; n * cfg.batch];
    let mut batch_rewards = vec![0.0; n * cfg.batch];
    let mut counts = OutcomeCounts(vec![0; arity]);

    let refresh = |logits: &[f64], probs: &mut [f64]| {
        for (z, p) in logits.chunks_exact(arity).zip(probs.chunks_exact_mut(arity)) {
            softmax_into(z, p);
        }
    };
    refresh(&logits, &mut probs);

    let snapshot = |probs: &[f64]| PolicyProfile::from_raw(arity, probs.to_vec());
    let first = snapshot(&probs);
    let mut record = LearningRecord {
        trajectory: Trajectory {
            steps: vec![0],
            points: vec![first.population_point()],
            profiles: Vec::new(),
            beta: cfg.learning_rate,
            floor: 0.0,
            spec_fingerprint: spec.fingerprint(),
        },
        cooperation: vec![cooperation_level(&first)],
        mean_reward: vec![None],
        final_profile: first,
    };
    let mut reward_acc = 0.0;
    let mut reward_games = 0usize;

    for update in 1..=cfg.updates {
        for game in 0..cfg.batch {
            counts.0.iter_mut().for_each(|c| *c = 0);
            for (i, choice) in choices.iter_mut().enumerate() {
                *choice = sample_row(&probs[i * arity..(i + 1) * arity], &mut rng);
                counts.0[*choice] += 1;
            }
            let table = reward_table(spec, &counts);
            for i in 0..n {
                rewards[i] = table[choices[i]];
                batch_choices[game * n + i] = choices[i];
                batch_rewards[game * n + i] = rewards[i];
                reward_acc += rewards[i];
            }
            reward_games += n;
        }
        if cfg.baseline == Baseline::RunningMean && !baseline_ready {
            for (i, b) in baseline.iter_mut().enumerate() {
                *b = (0..cfg.batch).map(|g| batch_rewards[g * n + i]).sum::<f64>() / cfg.batch as f64;
            }
            baseline_ready = true;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for game in 0..cfg.batch {
            for i in 0..n {
                let a = batch_choices[game * n + i];
                let advantage = batch_rewards[game * n + i] - baseline[i];
                let p = &probs[i * arity..(i + 1) * arity];
                let g = &mut grad[i * arity..(i + 1) * arity];
                for x in 0..arity {
                    let indicator = if x == a { 1.0 } else { 0.0 };
                    g[x] += advantage * (indicator - p[x]);
                }
            }
        }
        let scale = cfg.learning_rate / cfg.batch as f64;
        for (z, g) in logits.iter_mut().zip(&grad) {
            *z += scale * g;
        }
        if cfg.baseline == Baseline::RunningMean {
            for (i, b) in baseline.iter_mut().enumerate() {
                let mean = (0..cfg.batch).map(|g| batch_rewards[g * n + i]).sum::<f64>() / cfg.batch as f64;
                *b = BASELINE_DECAY * *b + (1.0 - BASELINE_DECAY) * mean;
            }
        }
        refresh(&logits, &mut probs);
        if spec.variant == Variant::CdnpHomo && spec.lambda > 0.0 {
            convert_minority(&mut logits, &probs, arity, spec.lambda, &mut rng);
            refresh(&logits, &mut probs);
        }
        if update % cfg.snapshot_interval == 0 || update == cfg.updates {
            let profile = snapshot(&probs);
            record.trajectory.steps.push(update);
            record.trajectory.points.push(profile.population_point());
            record.cooperation.push(cooperation_level(&profile));
            record.mean_reward.push(Some(reward_acc / reward_games as f64));
            reward_acc = 0.0;
            reward_games = 0;
        }
    }
    record.final_profile = snapshot(&probs);
    Ok(record)
}

/// Number of completed swings: the level rises above `high` and then falls below
/// `low`.
pub fn count_oscillations(levels: &[f64], high: f64, low: f64) -> usize {
    let mut above = false;
    let mut swings = 0;
    for &x in levels {
        if x > high {
            above = true;
        } else if x < low && above {
            above = false;
            swings += 1;
        }
    }
    swings
}
