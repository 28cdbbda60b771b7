//! Basin classification, cooperative volumes and one-at-a-time sensitivity.

use super::{check_floor, detect_limit_cycle, step_profile, symmetric_step, CycleReport, DynamicsError, FlowParams, SymmetricKernel, Trajectory};
use crate::game::{GameSpec, PolicyProfile, C, D, N, PUN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasinLabel {
    Cooperative,
    NonCooperative,
    Undecided,
}

/// Outcome of one basin classification with its convergence diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub label: BasinLabel,
    pub final_point: Vec<f64>,
    pub steps_used: usize,
    /// Norm of the last step (largest over agents for heterogeneous profiles).
    pub final_step_norm: f64,
    /// Recurrence found in the tail when the budget ran out.
    pub cycle: Option<CycleReport>,
}

/// Mass on strategies that pay into the public good.
pub fn contributing_mass(point: &[f64]) -> f64 {
    point[C] + point.get(PUN).copied().unwrap_or(0.0)
}

fn converged_label(point: &[f64], threshold: f64) -> BasinLabel {
    if contributing_mass(point) > threshold {
        BasinLabel::Cooperative
    } else if point[D] + point[N] > threshold {
        BasinLabel::NonCooperative
    } else {
        BasinLabel::Undecided
    }
}

/// Snapshots recorded over the second half of the budget for recurrence checks.
const TAIL_SNAPSHOTS: usize = 20_000;
/// Recurrence radius used when the step budget runs out.
const TAIL_CYCLE_EPS: f64 = 1e-3;

struct Tail {
    every: usize,
    from: usize,
    steps: Vec<usize>,
    points: Vec<Vec<f64>>,
    max_contributing: f64,
}

impl Tail {
    fn new(max_steps: usize) -> Self {
        let from = max_steps / 2;
        Tail {
            every: ((max_steps - from) / TAIL_SNAPSHOTS).max(1),
            from,
            steps: Vec::new(),
            points: Vec::new(),
            max_contributing: 0.0,
        }
    }

    fn record(&mut self, t: usize, point: &[f64]) {
        if t >= self.from && (t - self.from) % self.every == 0 {
            self.max_contributing = self.max_contributing.max(contributing_mass(point));
            self.steps.push(t);
            self.points.push(point.to_vec());
        }
    }

    fn label(self, spec: &GameSpec, params: &FlowParams) -> (BasinLabel, Option<CycleReport>) {
        let traj = Trajectory {
            steps: self.steps,
            points: self.points,
            profiles: Vec::new(),
            beta: params.beta,
            floor: params.floor,
            spec_fingerprint: spec.fingerprint(),
        };
        let cycle = detect_limit_cycle(&traj, TAIL_CYCLE_EPS, 0);
        let label = if cycle.is_some() && self.max_contributing <= params.mass_threshold {
            BasinLabel::NonCooperative
        } else {
            BasinLabel::Undecided
        };
        (label, cycle)
    }
}

/// Runs the flow from `start` until the step norm drops below `params.tol` or
/// `params.max_steps` is used up.
///
/// Converged runs are labelled by their mass: contributing mass above the threshold
/// is cooperative, defecting plus abstaining mass above it is non-cooperative. A run
/// that exhausts the budget is non-cooperative only if its tail keeps returning to
/// the same point without ever reaching the cooperative mass.
pub fn classify_basin(spec: &GameSpec, start: &PolicyProfile, params: &FlowParams) -> Result<BasinReport, DynamicsError> {
    params.validate(start.arity())?;
    start.check_variant(spec)?;
    if start.is_symmetric() {
        let mut kernel = SymmetricKernel::new(spec.n);
        return Ok(classify_symmetric(&mut kernel, spec, start.row(0), params, true));
    }
    let mut tail = Tail::new(params.max_steps);
    let mut kernel = None;
    let mut current = start.clone();
    let mut norm = f64::INFINITY;
    for t in 1..=params.max_steps {
        let (next, step_norm) = step_profile(spec, &current, params, &mut kernel)?;
        current = next;
        norm = step_norm;
        let point = current.population_point();
        if norm < params.tol {
            return Ok(BasinReport {
                label: converged_label(&point, params.mass_threshold),
                final_point: point,
                steps_used: t,
                final_step_norm: norm,
                cycle: None,
            });
        }
        tail.record(t, &point);
    }
    let (label, cycle) = tail.label(spec, params);
    Ok(BasinReport {
        label,
        final_point: current.population_point(),
        steps_used: params.max_steps,
        final_step_norm: norm,
        cycle,
    })
}

/// Symmetric-start classification; volume estimation skips the tail analysis
/// because only the cooperative label is counted.
fn classify_symmetric(
    kernel: &mut SymmetricKernel,
    spec: &GameSpec,
    start: &[f64],
    params: &FlowParams,
    tail_analysis: bool,
) -> BasinReport {
    let mut row = start.to_vec();
    let mut tail = tail_analysis.then(|| Tail::new(params.max_steps));
    let mut norm = f64::INFINITY;
    for t in 1..=params.max_steps {
        norm = symmetric_step(kernel, spec, &mut row, params);
        if norm < params.tol {
            return BasinReport {
                label: converged_label(&row, params.mass_threshold),
                final_point: row,
                steps_used: t,
                final_step_norm: norm,
                cycle: None,
            };
        }
        if let Some(tail) = tail.as_mut() {
            tail.record(t, &row);
        }
    }
    let (label, cycle) = match tail {
        Some(tail) => tail.label(spec, params),
        None => (BasinLabel::Undecided, None),
    };
    BasinReport { label, final_point: row, steps_used: params.max_steps, final_step_norm: norm, cycle }
}

/// Uniform point of the `arity`-simplex from normalised exponential spacings.
pub fn uniform_simplex_point<R: Rng + ?Sized>(rng: &mut R, arity: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..arity).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub value: f64,
    /// Binomial standard error of `value`.
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
    pub seed: u64,
    pub params: FlowParams,
    pub spec_fingerprint: String,
}

/// Fraction of uniform symmetric starts that the flow carries to a cooperative state.
///
/// Start `i` is drawn from its own ChaCha stream `(seed, i)`, so the estimate does
/// not depend on how the work is scheduled.
pub fn cooperative_volume(spec: &GameSpec, samples: usize, seed: u64, params: &FlowParams) -> Result<VolumeReport, DynamicsError> {
    if samples == 0 {
        return Err(DynamicsError::Contract("need at least one sample".into()));
    }
    spec.validate()?;
    params.validate(spec.arity())?;
    check_floor(params.floor, spec.arity())?;
    let arity = spec.arity();
    let hits: Vec<bool> = (0..samples)
        .into_par_iter()
        .map_init(
            || SymmetricKernel::new(spec.n),
            |kernel, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let start = uniform_simplex_point(&mut rng, arity);
                classify_symmetric(kernel, spec, &start, params, false).label == BasinLabel::Cooperative
            },
        )
        .collect();
    let hits = hits.iter().filter(|&&h| h).count();
    let value = hits as f64 / samples as f64;
    Ok(VolumeReport {
        value,
        stderr: (value * (1.0 - value) / samples as f64).sqrt(),
        hits,
        samples,
        seed,
        params: params.clone(),
        spec_fingerprint: spec.fingerprint(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TornadoRow {
    pub parameter: String,
    pub low_value: f64,
    pub high_value: f64,
    pub low_volume: f64,
    pub high_volume: f64,
    pub low_stderr: f64,
    pub high_stderr: f64,
}

/// Names of the parameters perturbed by [`sensitivity_sweep`] for this spec.
pub fn sweep_parameters(spec: &GameSpec) -> Vec<&'static str> {
    let mut names = vec!["b", "c", "sigma", "p", "k"];
    match spec.variant {
        crate::game::Variant::Cdnpa => names.push("alpha"),
        crate::game::Variant::CdnpHomo => names.push("lambda"),
        _ => {}
    }
    names
}

fn with_parameter(spec: &GameSpec, name: &str, value: f64) -> GameSpec {
    let mut s = spec.clone();
    match name {
        "b" => s.b = value,
        "c" => s.c = value,
        "sigma" => s.sigma = value,
        "p" => s.p = value,
        "k" => s.k = value,
        "alpha" => s.alpha = value,
        "lambda" => s.lambda = value.clamp(0.0, 1.0),
        _ => unreachable!("unknown sweep parameter {name}"),
    }
    s
}

fn parameter(spec: &GameSpec, name: &str) -> f64 {
    match name {
        "b" => spec.b,
        "c" => spec.c,
        "sigma" => spec.sigma,
        "p" => spec.p,
        "k" => spec.k,
        "alpha" => spec.alpha,
        "lambda" => spec.lambda,
        _ => unreachable!("unknown sweep parameter {name}"),
    }
}

/// One-at-a-time sensitivity: each parameter scaled by `1 ± delta` with the others
/// held fixed. All volumes share `seed`, so rows differ only through the parameter.
pub fn sensitivity_sweep(
    spec: &GameSpec,
    delta: f64,
    samples: usize,
    seed: u64,
    params: &FlowParams,
) -> Result<Vec<TornadoRow>, DynamicsError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(DynamicsError::Contract(format!("delta must lie in [0, 1), got {delta}")));
    }
    spec.validate()?;
    sweep_parameters(spec)
        .into_iter()
        .map(|name| {
            let x = parameter(spec, name);
            let low = with_parameter(spec, name, (1.0 - delta) * x);
            let high = with_parameter(spec, name, (1.0 + delta) * x);
            let lv = cooperative_volume(&low, samples, seed, params)?;
            let hv = cooperative_volume(&high, samples, seed, params)?;
            Ok(TornadoRow {
                parameter: name.to_string(),
                low_value: parameter(&low, name),
                high_value: parameter(&high, name),
                low_volume: lv.value,
                high_volume: hv.value,
                low_stderr: lv.stderr,
                high_stderr: hv.stderr,
            })
        })
        .collect()
}
