//! The one-step public-goods game family.
//!
//! Every variant shares the first three strategies: contribute (`C`), defect (`D`)
//! and stay out (`N`). Punishment variants add a fourth slot that holds either the
//! exploitable punisher `P` or the unexploitable punisher `PA`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on policy-row sums.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Largest joint-action space [`exact_value`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1 << 24;

/// Index of the contributor slot in every variant.
pub const C: usize = 0;
/// Index of the defector slot in every variant.
pub const D: usize = 1;
/// Index of the nonparticipant slot in every variant.
pub const N: usize = 2;
/// Index of the punisher slot (`P` or `PA`) in punishment variants.
pub const PUN: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid game parameter `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("invalid outcome counts: {0}")]
    InvalidCounts(String),
    #[error("invalid policy profile: {0}")]
    InvalidProfile(String),
    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("instance too large to enumerate: {size} joint actions exceeds {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("{0}")]
    Contract(String),
}

/// Game variants in order of the case study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Contributors, defectors, nonparticipants.
    Cdn,
    /// Adds unexploitable punishers that also fine pure contributors.
    Cdnpa,
    /// Adds exploitable punishers that only fine defectors.
    Cdnp,
    /// Exploitable punishers plus homophilic conversion between C and P.
    CdnpHomo,
}

/// Atomic strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    C,
    D,
    N,
    P,
    PA,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Cdn, Variant::Cdnpa, Variant::Cdnp, Variant::CdnpHomo];

    /// The admissible strategies, in slot order.
    pub fn strategies(self) -> &'static [Strategy] {
        match self {
            Variant::Cdn => &[Strategy::C, Strategy::D, Strategy::N],
            Variant::Cdnpa => &[Strategy::C, Strategy::D, Strategy::N, Strategy::PA],
            Variant::Cdnp | Variant::CdnpHomo => &[Strategy::C, Strategy::D, Strategy::N, Strategy::P],
        }
    }

    pub fn arity(self) -> usize {
        self.strategies().len()
    }

    pub fn has_punisher(self) -> bool {
        self != Variant::Cdn
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cdn => "CDN",
            Variant::Cdnpa => "CDNPA",
            Variant::Cdnp => "CDNP",
            Variant::CdnpHomo => "CDNP_HOMO",
        }
    }

    /// Slot index of `s`, if admissible.
    pub fn index_of(self, s: Strategy) -> Option<usize> {
        self.strategies().iter().position(|&x| x == s)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CDN" => Ok(Variant::Cdn),
            "CDNPA" => Ok(Variant::Cdnpa),
            "CDNP" => Ok(Variant::Cdnp),
            "CDNP_HOMO" | "CDNPHOMO" => Ok(Variant::CdnpHomo),
            _ => Err(GameError::InvalidSpec { field: "variant", reason: format!("unknown variant `{s}`") }),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::C => "C",
            Strategy::D => "D",
            Strategy::N => "N",
            Strategy::P => "P",
            Strategy::PA => "PA",
        };
        f.write_str(s)
    }
}

/// Parameters of one game instance.
///
/// Fields a variant does not use are carried but ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub variant: Variant,
    pub n: usize,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl GameSpec {
    /// The case-study defaults: n=10, b=3, c=1, σ=1, p=2, k=0.35, α=1, λ=0.2.
    pub fn defaults(variant: Variant) -> Self {
        GameSpec { variant, n: 10, b: 3.0, c: 1.0, sigma: 1.0, p: 2.0, k: 0.35, alpha: 1.0, lambda: 0.2 }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn arity(&self) -> usize {
        self.variant.arity()
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.n < 2 {
            return Err(GameError::InvalidSpec { field: "n", reason: format!("need at least 2 agents, got {}", self.n) });
        }
        let nonneg = [("b", self.b), ("c", self.c), ("sigma", self.sigma), ("p", self.p), ("k", self.k), ("alpha", self.alpha)];
        for (field, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(GameError::InvalidSpec { field, reason: format!("must be finite and >= 0, got {v}") });
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(GameError::InvalidSpec { field: "lambda", reason: format!("must lie in [0, 1], got {}", self.lambda) });
        }
        Ok(())
    }

    /// Stable textual fingerprint of the parameters a variant actually uses.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("{}:n={}:b={:e}:c={:e}:sigma={:e}", self.variant, self.n, self.b, self.c, self.sigma);
        if self.variant.has_punisher() {
            s.push_str(&format!(":p={:e}:k={:e}", self.p, self.k));
        }
        match self.variant {
            Variant::Cdnpa => s.push_str(&format!(":alpha={:e}", self.alpha)),
            Variant::CdnpHomo => s.push_str(&format!(":lambda={:e}", self.lambda)),
            _ => {}
        }
        s
    }
}

/// Head counts of a realized joint action, one entry per strategy slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeCounts(pub Vec<usize>);

impl OutcomeCounts {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn get(&self, slot: usize) -> usize {
        self.0.get(slot).copied().unwrap_or(0)
    }

    pub fn validate(&self, spec: &GameSpec) -> Result<(), GameError> {
        if self.0.len() != spec.arity() {
            return Err(GameError::InvalidCounts(format!(
                "{} entries for variant {} with {} strategies",
                self.0.len(),
                spec.variant,
                spec.arity()
            )));
        }
        if self.total() != spec.n {
            return Err(GameError::InvalidCounts(format!("counts sum to {} but n = {}", self.total(), spec.n)));
        }
        Ok(())
    }
}

/// Per-agent mixed strategies, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile {
    arity: usize,
    theta: Vec<f64>,
}

impl PolicyProfile {
    /// Builds a profile from rows that must already be probability vectors.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, GameError> {
        let arity = rows.first().map(Vec::len).ok_or_else(|| GameError::InvalidProfile("no rows".into()))?;
        let mut theta = Vec::with_capacity(rows.len() * arity);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != arity {
                return Err(GameError::InvalidProfile(format!("row {i} has {} entries, expected {arity}", row.len())));
            }
            check_row(row).map_err(|e| GameError::InvalidProfile(format!("row {i}: {e}")))?;
            theta.extend_from_slice(row);
        }
        Ok(PolicyProfile { arity, theta })
    }

    /// Builds a profile from nonnegative weights, normalising each row once.
    pub fn from_weights(rows: &[Vec<f64>]) -> Result<Self, GameError> {
        let normalised: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = row.iter().sum();
                if row.iter().any(|&w| !w.is_finite() || w < 0.0) || s <= 0.0 {
                    return Err(GameError::InvalidProfile(format!("row {i} has no positive mass")));
                }
                Ok(row.iter().map(|w| w / s).collect())
            })
            .collect::<Result<_, _>>()?;
        Self::new(&normalised)
    }

    /// Every agent plays `row`.
    pub fn symmetric(n: usize, row: &[f64]) -> Result<Self, GameError> {
        Self::new(&vec![row.to_vec(); n])
    }

    /// Every agent plays strategy slot `slot` with certainty.
    pub fn pure(n: usize, arity: usize, slot: usize) -> Self {
        let mut row = vec![0.0; arity];
        row[slot] = 1.0;
        PolicyProfile { arity, theta: row.repeat(n) }
    }

    pub(crate) fn from_raw(arity: usize, theta: Vec<f64>) -> Self {
        debug_assert_eq!(theta.len() % arity, 0);
        PolicyProfile { arity, theta }
    }

    pub fn n(&self) -> usize {
        self.theta.len() / self.arity
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.theta[i * self.arity..(i + 1) * self.arity]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.theta.chunks_exact(self.arity)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    /// True when all rows are bitwise identical.
    pub fn is_symmetric(&self) -> bool {
        let first = self.row(0);
        self.rows().all(|r| r == first)
    }

    /// Mean row over agents: the population point plotted in ternary and quaternary diagrams.
    pub fn population_point(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let mut out = vec![0.0; self.arity];
        for row in self.rows() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn check_variant(&self, spec: &GameSpec) -> Result<(), GameError> {
        if self.arity != spec.arity() {
            return Err(GameError::InvalidProfile(format!(
                "profile has {} strategies, variant {} has {}",
                self.arity,
                spec.variant,
                spec.arity()
            )));
        }
        if self.n() != spec.n {
            return Err(GameError::InvalidProfile(format!("profile has {} agents, spec has n = {}", self.n(), spec.n)));
        }
        Ok(())
    }
}

fn check_row(row: &[f64]) -> Result<(), String> {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(format!("entries must be finite and nonnegative: {row:?}"));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_TOLERANCE {
        return Err(format!("sums to {s}, not 1"));
    }
    Ok(())
}

/// Public-good share received by one participant: `b · contributors / participants`.
///
/// Both the realized game (integer counts) and the mean-field form (proportions,
/// with the participant count as `1 − p_N`) go through this one formula. With no
/// participants no public good exists and the share is zero.
#[inline]
pub fn public_share(b: f64, contributors: f64, participants: f64) -> f64 {
    if participants > 0.0 {
        b * contributors / participants
    } else {
        0.0
    }
}

/// Reward per strategy slot under the realized counts. Slots nobody played are `None`.
pub fn strategy_rewards(spec: &GameSpec, counts: &OutcomeCounts) -> Result<Vec<Option<f64>>, GameError> {
    counts.validate(spec)?;
    let full = reward_table(spec, counts);
    Ok(full
        .into_iter()
        .enumerate()
        .map(|(slot, r)| (counts.get(slot) > 0).then_some(r))
        .collect())
}

/// Reward formula for every slot, evaluated whether or not the slot is occupied.
pub(crate) fn reward_table(spec: &GameSpec, counts: &OutcomeCounts) -> Vec<f64> {
    let n = spec.n as f64;
    let nc = counts.get(C) as f64;
    let nd = counts.get(D) as f64;
    let nn = counts.get(N) as f64;
    let npun = if spec.variant.has_punisher() { counts.get(PUN) as f64 } else { 0.0 };
    let share = public_share(spec.b, nc + npun, n - nn);
    match spec.variant {
        Variant::Cdn => vec![share - spec.c, share, spec.sigma],
        Variant::Cdnpa => vec![
            share - spec.c - spec.alpha * spec.p * npun / n,
            share - spec.p * npun / n,
            spec.sigma,
            share - spec.c - spec.k * nd / n - spec.alpha * spec.k * nc / n,
        ],
        Variant::Cdnp | Variant::CdnpHomo => vec![
            share - spec.c,
            share - spec.p * npun / n,
            spec.sigma,
            share - spec.c - spec.k * nd / n,
        ],
    }
}

/// A realized joint action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub counts: OutcomeCounts,
    /// Strategy slot chosen by each agent.
    pub choices: Vec<usize>,
}

/// Draws each agent's strategy independently from its row; deterministic given `seed`.
pub fn sample_outcome(profile: &PolicyProfile, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_outcome_with(profile, &mut rng)
}

pub fn sample_outcome_with<R: Rng + ?Sized>(profile: &PolicyProfile, rng: &mut R) -> Outcome {
    let mut counts = vec![0; profile.arity()];
    let choices = profile
        .rows()
        .map(|row| {
            let slot = sample_row(row, rng);
            counts[slot] += 1;
            slot
        })
        .collect();
    Outcome { counts: OutcomeCounts(counts), choices }
}

/// Inverse-CDF draw from one probability row.
pub fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (slot, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return slot;
        }
    }
    // u landed in the rounding gap above the cumulative sum: take the last positive slot.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Exact expected one-step reward of `agent` under the product policy, by full enumeration.
pub fn exact_value(spec: &GameSpec, profile: &PolicyProfile, agent: usize) -> Result<f64, GameError> {
    profile.check_variant(spec)?;
    exact_value_at(spec, profile, agent, profile.row(agent))
}

/// Like [`exact_value`] but with `agent`'s row replaced by `own_row`.
///
/// `own_row` need not lie on the simplex. The value is linear in it, which is what
/// makes finite differences off the simplex meaningful.
pub fn exact_value_at(spec: &GameSpec, profile: &PolicyProfile, agent: usize, own_row: &[f64]) -> Result<f64, GameError> {
    spec.validate()?;
    let n = profile.n();
    if agent >= n {
        return Err(GameError::AgentOutOfRange { agent, n });
    }
    let arity = spec.arity();
    if own_row.len() != arity {
        return Err(GameError::InvalidProfile(format!("own row has {} entries, expected {arity}", own_row.len())));
    }
    let size = (arity as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(GameError::TooLarge { size, limit: ENUMERATION_LIMIT });
    }
    let others: Vec<&[f64]> = (0..n).filter(|&j| j != agent).map(|j| profile.row(j)).collect();
    let mut counts = vec![0usize; arity];
    let mut total = 0.0;
    enumerate_others(spec, &others, own_row, 0, 1.0, &mut counts, &mut total);
    Ok(total)
}

fn enumerate_others(
    spec: &GameSpec,
    others: &[&[f64]],
    own_row: &[f64],
    depth: usize,
    weight: f64,
    counts: &mut Vec<usize>,
    total: &mut f64,
) {
    if depth == others.len() {
        for (slot, &w) in own_row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            counts[slot] += 1;
            let rewards = reward_table(spec, &OutcomeCounts(counts.clone()));
            counts[slot] -= 1;
            *total += weight * w * rewards[slot];
        }
        return;
    }
    for (slot, &p) in others[depth].iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        counts[slot] += 1;
        enumerate_others(spec, others, own_row, depth + 1, weight * p, counts, total);
        counts[slot] -= 1;
    }
}
