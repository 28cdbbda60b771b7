//! Environment, incentive and homophily losses for one agent.
//!
//! Every loss is averaged over the transitions of the batch and returns the
//! gradient with respect to the online parameters it trains.

use super::net::Approximator;
use serde::{Deserialize, Serialize};

/// One agent's view of one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub agent: usize,
    /// History summary and observation features at `t`.
    pub input: Vec<f64>,
    /// Features at `t + 1`; `None` on the last step of an episode.
    pub next_input: Option<Vec<f64>>,
    /// Environment actions of all agents at `t`.
    pub env_actions: Vec<usize>,
    /// Environment actions of all agents at `t + 1`, when there is a next step.
    pub next_env_actions: Option<Vec<usize>>,
    /// `incentives[j][k]` is the kind index agent `j` sent to agent `k` at `t`.
    pub incentives: Vec<Vec<usize>>,
    pub env_reward: f64,
    /// Incentive reward received, `η_e · Σ_j r_{j→i}`.
    pub received: f64,
    /// Incentive cost paid, `η_c · Σ_j |r_{i→j}|`.
    pub cost: f64,
    /// Row `i` of the environmental similarity matrix.
    pub similarity: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma_env: f64,
    pub gamma_inc: f64,
    /// Adds received incentives to the incentive target (ablation only).
    pub incentive_with_received: bool,
}

/// Incentive-head input: the agent's features followed by a one-hot of the
/// target's environment action.
pub fn head_input(input: &[f64], target_action: usize, n_env_actions: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(input.len() + n_env_actions);
    x.extend_from_slice(input);
    x.extend((0..n_env_actions).map(|a| if a == target_action { 1.0 } else { 0.0 }));
    x
}

fn n_env_actions<A: Approximator>(head: &A, input: &[f64]) -> usize {
    head.n_inputs() - input.len()
}

/// Value of one joint incentive action: the sum over targets of the shared
/// pairwise head evaluated at that target's environment action.
pub fn incentive_q_total<A: Approximator>(
    head: &A,
    params: &[f64],
    agent: usize,
    input: &[f64],
    env_actions: &[usize],
    kinds: &[usize],
) -> f64 {
    let m = n_env_actions(head, input);
    (0..env_actions.len())
        .filter(|&j| j != agent)
        .map(|j| head.forward(params, &head_input(input, env_actions[j], m))[kinds[j]])
        .sum()
}

/// Maximum of [`incentive_q_total`] over joint incentive actions, taken target by
/// target because the sum is separable. Returns the value and the maximizing kinds
/// (lowest index on ties; the agent's own entry is 0).
pub fn max_incentive_q<A: Approximator>(
    head: &A,
    params: &[f64],
    agent: usize,
    input: &[f64],
    env_actions: &[usize],
) -> (f64, Vec<usize>) {
    let m = n_env_actions(head, input);
    let mut kinds = vec![0; env_actions.len()];
    let mut total = 0.0;
    for j in (0..env_actions.len()).filter(|&j| j != agent) {
        let q = head.forward(params, &head_input(input, env_actions[j], m));
        let k = argmax(&q);
        kinds[j] = k;
        total += q[k];
    }
    (total, kinds)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Squared TD error of the environment Q-function. The target includes incentives
/// received from other agents.
pub fn loss_environment<A: Approximator>(
    net: &A,
    params: &[f64],
    target_params: &[f64],
    batch: &[Transition],
    cfg: &LossConfig,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for tr in batch {
        let a = tr.env_actions[tr.agent];
        let bootstrap = tr.next_input.as_ref().map_or(0.0, |x| cfg.gamma_env * max(&net.forward(target_params, x)));
        let y = tr.env_reward + tr.received + bootstrap;
        let q = net.forward(params, &tr.input);
        let err = q[a] - y;
        loss += err * err * scale;
        let mut dout = vec![0.0; q.len()];
        dout[a] = 2.0 * err * scale;
        net.backward(params, &tr.input, &dout, &mut grad);
    }
    (loss, grad)
}

fn incentive_target<A: Approximator>(head: &A, target_params: &[f64], tr: &Transition, cfg: &LossConfig) -> f64 {
    let mut y = tr.env_reward - tr.cost;
    if cfg.incentive_with_received {
        y += tr.received;
    }
    if let (Some(x), Some(next_actions)) = (&tr.next_input, &tr.next_env_actions) {
        y += cfg.gamma_inc * max_incentive_q(head, target_params, tr.agent, x, next_actions).0;
    }
    y
}

/// Incentive and homophily losses together, sharing one evaluation of every
/// pairwise head. Returns `(L_inc, L_homo, ∇(λ_inc·L_inc + λ_homo·L_homo))`.
pub fn incentive_objective<A: Approximator>(
    head: &A,
    params: &[f64],
    target_params: &[f64],
    batch: &[Transition],
    cfg: &LossConfig,
    lambda_inc: f64,
    lambda_homo: f64,
) -> (f64, f64, Vec<f64>) {
    objective(head, params, target_params, batch, cfg, lambda_inc, lambda_homo, true)
}

#[allow(clippy::too_many_arguments)]
fn objective<A: Approximator>(
    head: &A,
    params: &[f64],
    target_params: &[f64],
    batch: &[Transition],
    cfg: &LossConfig,
    lambda_inc: f64,
    lambda_homo: f64,
    with_incentive: bool,
) -> (f64, f64, Vec<f64>) {
    let mut grad = vec![0.0; head.n_params()];
    let (mut l_inc, mut l_homo) = (0.0, 0.0);
    let scale = 1.0 / batch.len() as f64;
    for tr in batch {
        let i = tr.agent;
        let n = tr.env_actions.len();
        let m = n_env_actions(head, &tr.input);
        let inputs: Vec<Option<Vec<f64>>> =
            (0..n).map(|k| (k != i).then(|| head_input(&tr.input, tr.env_actions[k], m))).collect();
        let heads: Vec<Option<Vec<f64>>> = inputs.iter().map(|x| x.as_ref().map(|x| head.forward(params, x))).collect();
        let mut douts: Vec<Vec<f64>> = vec![vec![0.0; head.n_outputs()]; n];

        if with_incentive {
            let q: f64 = (0..n).filter(|&k| k != i).map(|k| heads[k].as_ref().unwrap()[tr.incentives[i][k]]).sum();
            let err = q - incentive_target(head, target_params, tr, cfg);
            l_inc += err * err * scale;
            for k in (0..n).filter(|&k| k != i) {
                douts[k][tr.incentives[i][k]] += lambda_inc * 2.0 * err * scale;
            }
        }

        for j in (0..n).filter(|&j| j != i) {
            let s = tr.similarity[j];
            if s == 0.0 {
                continue;
            }
            for k in (0..n).filter(|&k| k != i && k != j) {
                let z = heads[k].as_ref().unwrap();
                let (probs, log_z) = softmax(z);
                let chosen = tr.incentives[j][k];
                l_homo += s * (log_z - z[chosen]) * scale;
                for (c, p) in probs.iter().enumerate() {
                    let onehot = if c == chosen { 1.0 } else { 0.0 };
                    douts[k][c] += lambda_homo * s * (p - onehot) * scale;
                }
            }
        }

        for k in (0..n).filter(|&k| k != i) {
            if douts[k].iter().any(|&d| d != 0.0) {
                head.backward(params, inputs[k].as_ref().unwrap(), &douts[k], &mut grad);
            }
        }
    }
    (l_inc, l_homo, grad)
}

/// Squared TD error of the summed incentive Q-function. Received incentives are
/// left out of the target unless the ablation flag is set.
pub fn loss_incentive<A: Approximator>(
    head: &A,
    params: &[f64],
    target_params: &[f64],
    batch: &[Transition],
    cfg: &LossConfig,
) -> (f64, Vec<f64>) {
    let (l, _, g) = incentive_objective(head, params, target_params, batch, cfg, 1.0, 0.0);
    (l, g)
}

/// Cross-entropy between the incentive kinds other agents actually sent and this
/// agent's head softmax, weighted by environmental similarity.
pub fn loss_homophily<A: Approximator>(head: &A, params: &[f64], batch: &[Transition]) -> (f64, Vec<f64>) {
    let cfg = LossConfig { gamma_env: 0.0, gamma_inc: 0.0, incentive_with_received: false };
    let (_, l, g) = objective(head, params, params, batch, &cfg, 0.0, 1.0, false);
    (l, g)
}

/// Softmax probabilities and log-partition.
fn softmax(z: &[f64]) -> (Vec<f64>, f64) {
    let m = max(z);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    (e.iter().map(|v| v / s).collect(), m + s.ln())
}
