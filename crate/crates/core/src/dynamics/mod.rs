//! Projected gradient flow on the population policy space.
//!
//! Every agent moves its row along its own value gradient (or homophily rate) and is
//! projected back onto the simplex after each step. Flows used for basin
//! classification keep a small exploration floor under every action probability, so
//! a strategy that is absent from the population can always re-invade.

mod basin;
mod cycle;
mod raster;
mod simplex;

pub use basin::{
    classify_basin, contributing_mass, cooperative_volume, sensitivity_sweep, sweep_parameters, uniform_simplex_point,
    BasinLabel, BasinReport, TornadoRow, VolumeReport,
};
pub use cycle::{detect_limit_cycle, CycleReport};
pub use raster::{field_raster, simplex_grid, FieldPoint};
pub use simplex::{project_to_floored_simplex, project_to_simplex};

use crate::analytics::{assemble, closed_form_gradient};
use crate::game::{GameError, GameSpec, PolicyProfile, C, N, PUN};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use simplex::{check_floor, project_in_place};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite input {0:?}")]
    NonFinite(Vec<f64>),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("{0}")]
    Contract(String),
}

/// Step size, exploration floor and convergence thresholds of a flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Learning rate of one explicit step.
    pub beta: f64,
    /// Minimum probability kept on every strategy.
    pub floor: f64,
    /// Step budget for basin classification.
    pub max_steps: usize,
    /// Convergence threshold on the Euclidean norm of one step.
    pub tol: f64,
    /// Mass threshold for the cooperative and non-cooperative labels.
    pub mass_threshold: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { beta: 1e-3, floor: 0.01, max_steps: 200_000, tol: 1e-8, mass_threshold: 0.9 }
    }
}

impl FlowParams {
    /// A plain projected flow with no exploration floor.
    pub fn unfloored(beta: f64) -> Self {
        FlowParams { beta, floor: 0.0, ..Default::default() }
    }

    pub fn validate(&self, arity: usize) -> Result<(), DynamicsError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(DynamicsError::Contract(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(DynamicsError::Contract(format!("tol must be positive, got {}", self.tol)));
        }
        if !(0.0..=1.0).contains(&self.mass_threshold) {
            return Err(DynamicsError::Contract("mass_threshold must lie in [0, 1]".into()));
        }
        check_floor(self.floor, arity)
    }
}

/// Snapshots of a flow: population points (agent-averaged rows) at increasing steps.
///
/// Heterogeneous starts also keep the full profiles; symmetric starts stay symmetric,
/// so the population point carries all the information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub profiles: Vec<PolicyProfile>,
    pub beta: f64,
    pub floor: f64,
    pub spec_fingerprint: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Binomial weights for the expectations of a symmetric population, where every
/// other agent opts out with the same probability.
#[derive(Clone, Debug)]
pub struct SymmetricKernel {
    n: usize,
    /// `C(n−1, d) / (n − d)` for `d = 0..n−1`.
    w_i: Vec<f64>,
    /// `C(n−2, d) / (n − d)` for `d = 0..n−2`.
    w_ij: Vec<f64>,
    t_pow: Vec<f64>,
    s_pow: Vec<f64>,
}

impl SymmetricKernel {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two agents");
        let binom = |m: usize| {
            let mut row = vec![1.0f64; m + 1];
            for d in 1..=m {
                row[d] = row[d - 1] * (m + 1 - d) as f64 / d as f64;
            }
            row
        };
        let w_i = binom(n - 1).iter().enumerate().map(|(d, c)| c / (n - d) as f64).collect();
        let w_ij = binom(n - 2).iter().enumerate().map(|(d, c)| c / (n - d) as f64).collect();
        SymmetricKernel { n, w_i, w_ij, t_pow: vec![0.0; n], s_pow: vec![0.0; n] }
    }

    /// `(E_{−i}, E_{−ij})` when every other agent opts out with probability `t`.
    pub fn expectations(&mut self, t: f64) -> (f64, f64) {
        let m = self.n - 1;
        let s = 1.0 - t;
        self.t_pow[0] = 1.0;
        self.s_pow[0] = 1.0;
        for d in 1..=m {
            self.t_pow[d] = self.t_pow[d - 1] * t;
            self.s_pow[d] = self.s_pow[d - 1] * s;
        }
        let e_i = (0..=m).map(|d| self.w_i[d] * self.t_pow[d] * self.s_pow[m - d]).sum();
        let e_ij = (0..m).map(|d| self.w_ij[d] * self.t_pow[d] * self.s_pow[m - 1 - d]).sum();
        (e_i, e_ij)
    }

    /// Gradient (or homophily rate) of any agent when all agents play `row`.
    pub fn rate(&mut self, spec: &GameSpec, row: &[f64]) -> Vec<f64> {
        let (e_i, e_ij) = self.expectations(row[N]);
        let others_n = (self.n - 1) as f64;
        let contributing = row[C] + if spec.variant.has_punisher() { row[PUN] } else { 0.0 };
        let others: Vec<f64> = row.iter().map(|v| v * others_n).collect();
        assemble(spec, e_i, others_n * contributing * e_ij, &others, row)
    }
}

/// One explicit step of the projected flow for a symmetric population, in place.
/// Returns the Euclidean norm of the change in the row.
pub(crate) fn symmetric_step(kernel: &mut SymmetricKernel, spec: &GameSpec, row: &mut [f64], params: &FlowParams) -> f64 {
    let rate = kernel.rate(spec, row);
    let mut next = [0.0f64; 4];
    let next = &mut next[..row.len()];
    for ((x, r), y) in row.iter().zip(&rate).zip(next.iter_mut()) {
        *y = x + params.beta * r;
    }
    project_in_place(next, params.floor);
    let mut norm2 = 0.0;
    for (x, y) in row.iter_mut().zip(next.iter()) {
        norm2 += (y - *x) * (y - *x);
        *x = *y;
    }
    norm2.sqrt()
}

/// One step of the projected flow for every agent.
pub fn flow_step(spec: &GameSpec, profile: &PolicyProfile, params: &FlowParams) -> Result<PolicyProfile, DynamicsError> {
    Ok(step_profile(spec, profile, params, &mut None)?.0)
}

/// Returns the next profile and the largest per-agent step norm.
pub(crate) fn step_profile(
    spec: &GameSpec,
    profile: &PolicyProfile,
    params: &FlowParams,
    kernel: &mut Option<SymmetricKernel>,
) -> Result<(PolicyProfile, f64), DynamicsError> {
    params.validate(profile.arity())?;
    profile.check_variant(spec)?;
    if profile.is_symmetric() {
        let kernel = kernel.get_or_insert_with(|| SymmetricKernel::new(spec.n));
        let mut row = profile.row(0).to_vec();
        let norm = symmetric_step(kernel, spec, &mut row, params);
        return Ok((PolicyProfile::from_raw(row.len(), row.repeat(profile.n())), norm));
    }
    let mut theta = Vec::with_capacity(profile.as_flat().len());
    let mut max_norm: f64 = 0.0;
    for i in 0..profile.n() {
        let g = closed_form_gradient(spec, profile, i)?;
        let old = profile.row(i);
        let mut row: Vec<f64> = old.iter().zip(g.as_slice()).map(|(x, r)| x + params.beta * r).collect();
        project_in_place(&mut row, params.floor);
        let norm = old.iter().zip(&row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        max_norm = max_norm.max(norm);
        theta.extend(row);
    }
    Ok((PolicyProfile::from_raw(profile.arity(), theta), max_norm))
}

/// Integrates `steps` flow steps from `start`, keeping every `thin`-th snapshot
/// (the first and last are always kept).
pub fn integrate_flow(
    spec: &GameSpec,
    start: &PolicyProfile,
    params: &FlowParams,
    steps: usize,
    thin: usize,
) -> Result<Trajectory, DynamicsError> {
    if steps == 0 || thin == 0 {
        return Err(DynamicsError::Contract("steps and thin must be at least 1".into()));
    }
    params.validate(start.arity())?;
    start.check_variant(spec)?;
    let symmetric = start.is_symmetric();
    let mut traj = Trajectory {
        steps: vec![0],
        points: vec![start.population_point()],
        profiles: if symmetric { Vec::new() } else { vec![start.clone()] },
        beta: params.beta,
        floor: params.floor,
        spec_fingerprint: spec.fingerprint(),
    };
    if symmetric {
        let mut kernel = SymmetricKernel::new(spec.n);
        let mut row = start.row(0).to_vec();
        for t in 1..=steps {
            symmetric_step(&mut kernel, spec, &mut row, params);
            if t % thin == 0 || t == steps {
                traj.steps.push(t);
                traj.points.push(row.clone());
            }
        }
    } else {
        let mut current = start.clone();
        let mut kernel = None;
        for t in 1..=steps {
            current = step_profile(spec, &current, params, &mut kernel)?.0;
            if t % thin == 0 || t == steps {
                traj.steps.push(t);
                traj.points.push(current.population_point());
                traj.profiles.push(current.clone());
            }
        }
    }
    Ok(traj)
}
