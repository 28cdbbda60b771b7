//! Closed-form value gradients of the stateless games.
//!
//! For the homophily variant the returned vector is a rate, not a gradient: the
//! conversion term between `C` and `P` is added on top of the value gradient.

use crate::game::{GameError, GameSpec, PolicyProfile, Variant, C, D, N, PUN};
use serde::{Deserialize, Serialize};

/// Per-strategy partial derivatives (or homophily-adjusted rates) for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for GradientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Distribution of the number of agents opting out, for independent Bernoulli
/// opt-out probabilities (a Poisson-binomial law). Entry `d` is `P(count = d)`.
pub fn nonparticipant_distribution<I: IntoIterator<Item = f64>>(probs: I) -> Vec<f64> {
    let mut dist = vec![1.0];
    for q in probs {
        dist.push(0.0);
        for d in (1..dist.len()).rev() {
            dist[d] = dist[d] * (1.0 - q) + dist[d - 1] * q;
        }
        dist[0] *= 1.0 - q;
    }
    dist
}

/// `E[1 / (n − #nonparticipants among the non-excluded agents)]`.
///
/// With one excluded index this is `E_{−i}`, with two it is `E_{−ij}`. Excluded
/// agents never enter the expectation, so its derivative with respect to their
/// opt-out probability is zero.
pub fn participation_expectation(theta_n: &[f64], excluded: &[usize]) -> Result<f64, GameError> {
    let n = theta_n.len();
    if !(1..=2).contains(&excluded.len()) || (excluded.len() == 2 && excluded[0] == excluded[1]) {
        return Err(GameError::Contract(format!("excluded set must hold 1 or 2 distinct agents, got {excluded:?}")));
    }
    if let Some(&bad) = excluded.iter().find(|&&e| e >= n) {
        return Err(GameError::AgentOutOfRange { agent: bad, n });
    }
    if theta_n.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(GameError::Contract("opt-out probabilities must lie in [0, 1]".into()));
    }
    Ok(expectation_excluding(theta_n, excluded))
}

fn expectation_excluding(theta_n: &[f64], excluded: &[usize]) -> f64 {
    let n = theta_n.len();
    let dist = nonparticipant_distribution(
        theta_n.iter().enumerate().filter(|(k, _)| !excluded.contains(k)).map(|(_, &q)| q),
    );
    dist.iter().enumerate().map(|(d, p)| p / (n - d) as f64).sum()
}

/// Quantities shared by every variant's gradient for agent `i`.
struct Moments {
    /// `E_{−i}`.
    e_i: f64,
    /// `Σ_{j≠i} (θ_{j,C} + θ_{j,pun}) E_{−ij}`.
    contrib_e: f64,
    /// `Σ_{j≠i} θ_{j,X}` for each slot X.
    others: Vec<f64>,
}

fn moments(profile: &PolicyProfile, agent: usize, with_punisher: bool) -> Moments {
    let n = profile.n();
    let arity = profile.arity();
    let theta_n: Vec<f64> = profile.rows().map(|r| r[N]).collect();
    let e_i = expectation_excluding(&theta_n, &[agent]);
    let mut contrib_e = 0.0;
    let mut others = vec![0.0; arity];
    for j in (0..n).filter(|&j| j != agent) {
        let row = profile.row(j);
        for (o, v) in others.iter_mut().zip(row) {
            *o += v;
        }
        let contributing = row[C] + if with_punisher { row[PUN] } else { 0.0 };
        if contributing != 0.0 {
            contrib_e += contributing * expectation_excluding(&theta_n, &[agent, j]);
        }
    }
    Moments { e_i, contrib_e, others }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact gradient of agent `agent`'s value with respect to its own action
/// probabilities, or the homophily-adjusted rate for `CDNP_HOMO`.
pub fn closed_form_gradient(spec: &GameSpec, profile: &PolicyProfile, agent: usize) -> Result<GradientVector, GameError> {
    spec.validate()?;
    profile.check_variant(spec)?;
    if agent >= profile.n() {
        return Err(GameError::AgentOutOfRange { agent, n: profile.n() });
    }
    let m = moments(profile, agent, spec.variant.has_punisher());
    let own = profile.row(agent);
    Ok(GradientVector(assemble(spec, m.e_i, m.contrib_e, &m.others, own)))
}

/// Value gradient without the homophily term, for every variant.
pub fn value_gradient(spec: &GameSpec, profile: &PolicyProfile, agent: usize) -> Result<GradientVector, GameError> {
    let mut g = closed_form_gradient(spec, profile, agent)?;
    if spec.variant == Variant::CdnpHomo {
        let m = moments(profile, agent, true);
        let h = homophily_term(spec.lambda, &m.others, profile.row(agent));
        g.0[C] += h;
        g.0[PUN] -= h;
    }
    Ok(g)
}

/// Homophily conversion added to the `P` rate (and subtracted from `C`).
#[inline]
fn homophily_term(lambda: f64, others: &[f64], own: &[f64]) -> f64 {
    lambda * sign0(others[PUN] - others[C]) * own[C].min(own[PUN])
}

/// Builds the gradient from the shared moments. `others[X]` is `Σ_{j≠i} θ_{j,X}`.
pub(crate) fn assemble(spec: &GameSpec, e_i: f64, contrib_e: f64, others: &[f64], own: &[f64]) -> Vec<f64> {
    let n = spec.n as f64;
    let join = spec.b * (contrib_e + e_i) - spec.c;
    let free_ride = spec.b * contrib_e;
    match spec.variant {
        Variant::Cdn => vec![join, free_ride, spec.sigma],
        Variant::Cdnpa => vec![
            join - spec.alpha * spec.p * others[PUN] / n,
            free_ride - spec.p * others[PUN] / n,
            spec.sigma,
            join - spec.alpha * spec.k * others[C] / n - spec.k * others[D] / n,
        ],
        Variant::Cdnp => vec![join, free_ride - spec.p * others[PUN] / n, spec.sigma, join - spec.k * others[D] / n],
        Variant::CdnpHomo => {
            let h = homophily_term(spec.lambda, others, own);
            vec![join - h, free_ride - spec.p * others[PUN] / n, spec.sigma, join - spec.k * others[D] / n + h]
        }
    }
}

/// P-component minus C-component of the gradient (or rate).
pub fn second_order_gap(spec: &GameSpec, profile: &PolicyProfile, agent: usize) -> Result<f64, GameError> {
    if !matches!(spec.variant, Variant::Cdnp | Variant::CdnpHomo) {
        return Err(GameError::Contract(format!("second-order gap is defined for CDNP and CDNP_HOMO, not {}", spec.variant)));
    }
    let g = closed_form_gradient(spec, profile, agent)?;
    Ok(g[PUN] - g[C])
}

/// Inputs of the bi-level incentive analysis with binary first- and second-order actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilevelParams {
    pub n: usize,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub k: f64,
    /// Inner learning rate.
    pub beta: f64,
    /// First-order cooperation probability per agent.
    pub theta1: Vec<f64>,
    /// Second-order cooperation (punishing) probability per agent.
    pub theta2: Vec<f64>,
}

impl BilevelParams {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.n < 2 || self.theta1.len() != self.n || self.theta2.len() != self.n {
            return Err(GameError::Contract("theta1/theta2 must have n >= 2 entries".into()));
        }
        if self.theta1.iter().chain(&self.theta2).any(|t| !(0.0..=1.0).contains(t)) {
            return Err(GameError::Contract("probabilities must lie in [0, 1]".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(GameError::Contract("beta must be >= 0".into()));
        }
        Ok(())
    }
}

/// Gradient of agent `i`'s post-update value with respect to its punishing probability,
/// after every agent took one inner gradient step on its cooperation probability.
pub fn bilevel_incentive_gradient(bp: &BilevelParams, agent: usize) -> Result<f64, GameError> {
    bp.validate()?;
    if agent >= bp.n {
        return Err(GameError::AgentOutOfRange { agent, n: bp.n });
    }
    let n = bp.n as f64;
    let exploited: f64 = (0..bp.n).filter(|&j| j != agent).map(|j| 1.0 - bp.theta1[j]).sum();
    let total2: f64 = bp.theta2.iter().sum();
    let inner = (n - 1.0) * (bp.b / n * (bp.p + bp.k) - bp.k * bp.c)
        + bp.p * bp.k / n * ((n - 2.0) * total2 + n * bp.theta2[agent]);
    Ok(-bp.k / n * exploited + bp.beta / n * inner)
}

/// Homophily loss of agent `i` in the binary stateless game, evaluated at updated
/// cooperation probabilities `theta1_updated` and punishing probabilities `theta2`.
pub fn stateless_homophily_loss(theta1_updated: &[f64], theta2: &[f64], agent: usize) -> Result<f64, GameError> {
    let n = theta1_updated.len();
    if theta2.len() != n {
        return Err(GameError::Contract("theta1 and theta2 lengths differ".into()));
    }
    if agent >= n {
        return Err(GameError::AgentOutOfRange { agent, n });
    }
    if theta1_updated.iter().chain(theta2).any(|t| !(0.0..=1.0).contains(t)) {
        return Err(GameError::Contract("probabilities must lie in [0, 1]".into()));
    }
    let own2 = theta2[agent];
    if own2 <= 0.0 || own2 >= 1.0 {
        return Err(GameError::Contract(format!("log terms need 0 < theta2[{agent}] < 1, got {own2}")));
    }
    let (log_p, log_q) = (own2.ln(), (1.0 - own2).ln());
    let own1 = theta1_updated[agent];
    // Σ_{k∉{i,j}} (1 − θ'_k) = total − (1 − θ'_i) − (1 − θ'_j)
    let defect_total: f64 = theta1_updated.iter().map(|t| 1.0 - t).sum();
    let mut loss = 0.0;
    for j in (0..n).filter(|&j| j != agent) {
        let t1 = theta1_updated[j];
        let defectors = defect_total - (1.0 - own1) - (1.0 - t1);
        let agree = own1 * t1 + (1.0 - own1) * (1.0 - t1);
        let cross = theta2[j] * log_p + (1.0 - theta2[j]) * log_q;
        loss -= defectors * agree * cross;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn participation_examples() {
        assert_abs_diff_eq!(participation_expectation(&[0.0; 10], &[3]).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(participation_expectation(&[1.0; 7], &[0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(participation_expectation(&[0.5; 4], &[1]).unwrap(), 0.46875, epsilon = 1e-15);
    }

    #[test]
    fn participation_rejects_bad_exclusions() {
        assert!(participation_expectation(&[0.5; 4], &[]).is_err());
        assert!(participation_expectation(&[0.5; 4], &[0, 1, 2]).is_err());
        assert!(participation_expectation(&[0.5; 4], &[1, 1]).is_err());
        assert!(participation_expectation(&[0.5; 4], &[4]).is_err());
    }

    #[test]
    fn cdn_all_contributors() {
        let spec = GameSpec::defaults(Variant::Cdn);
        let g = closed_form_gradient(&spec, &PolicyProfile::pure(10, 3, C), 0).unwrap();
        assert_abs_diff_eq!(g[C], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[D], 2.7, epsilon = 1e-12);
        assert_eq!(g[N], 1.0);
    }

    #[test]
    fn gap_examples() {
        let spec = GameSpec::defaults(Variant::Cdnp);
        let mut rows = vec![vec![0.0, 1.0, 0.0, 0.0]; 10];
        rows[0] = vec![0.25, 0.25, 0.25, 0.25];
        let profile = PolicyProfile::new(&rows).unwrap();
        assert_abs_diff_eq!(second_order_gap(&spec, &profile, 0).unwrap(), -0.315, epsilon = 1e-12);

        let no_defectors = PolicyProfile::symmetric(10, &[0.3, 0.0, 0.3, 0.4]).unwrap();
        assert_eq!(second_order_gap(&spec, &no_defectors, 2).unwrap(), 0.0);

        let homo = GameSpec::defaults(Variant::CdnpHomo).with_lambda(0.2);
        let mut rows = vec![vec![0.0, 0.0, 0.0, 1.0]; 10];
        rows[0] = vec![0.5, 0.0, 0.0, 0.5];
        let profile = PolicyProfile::new(&rows).unwrap();
        assert_abs_diff_eq!(second_order_gap(&homo, &profile, 0).unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn gap_rejects_other_variants() {
        let spec = GameSpec::defaults(Variant::Cdnpa);
        let profile = PolicyProfile::symmetric(10, &[0.25; 4]).unwrap();
        assert!(matches!(second_order_gap(&spec, &profile, 0), Err(GameError::Contract(_))));
    }

    #[test]
    fn homophily_sign_at_parity_is_zero() {
        let homo = GameSpec::defaults(Variant::CdnpHomo);
        let cdnp = GameSpec::defaults(Variant::Cdnp);
        let profile = PolicyProfile::symmetric(10, &[0.3, 0.1, 0.3, 0.3]).unwrap();
        assert_eq!(closed_form_gradient(&homo, &profile, 0).unwrap(), closed_form_gradient(&cdnp, &profile, 0).unwrap());
    }

    #[test]
    fn bilevel_pure_exploitation_term() {
        let bp = BilevelParams {
            n: 4,
            b: 3.0,
            c: 1.0,
            p: 2.0,
            k: 0.35,
            beta: 0.0,
            theta1: vec![1.0; 4],
            theta2: vec![0.3, 0.6, 0.1, 0.9],
        };
        assert_eq!(bilevel_incentive_gradient(&bp, 1).unwrap(), 0.0);
        let bp = BilevelParams { theta1: vec![0.2, 0.9, 0.5, 0.0], ..bp };
        let expected = -0.35 / 4.0 * (0.8 + 0.5 + 1.0);
        assert_abs_diff_eq!(bilevel_incentive_gradient(&bp, 1).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn homophily_loss_edges() {
        assert_eq!(stateless_homophily_loss(&[1.0; 5], &[0.3, 0.4, 0.5, 0.6, 0.7], 2).unwrap(), 0.0);
        assert!(stateless_homophily_loss(&[0.5; 3], &[0.0, 0.5, 0.5], 0).is_err());
        assert!(stateless_homophily_loss(&[0.5; 3], &[0.5, 0.5, 1.0], 2).is_err());
    }

    #[test]
    fn homophily_loss_minimised_at_matching_policy() {
        let theta1 = [0.3, 0.6, 0.2, 0.5];
        let target = 0.35;
        let at = |x: f64| {
            let mut t2 = vec![target; 4];
            t2[0] = x;
            stateless_homophily_loss(&theta1, &t2, 0).unwrap()
        };
        let best = at(target);
        for x in [0.05, 0.2, 0.3, 0.34, 0.36, 0.5, 0.9] {
            assert!(at(x) > best);
        }
    }
}
