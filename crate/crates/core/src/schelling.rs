//! Schelling diagrams: the payoff of one focal agent as a function of how many
//! others take the first of two focal strategies.

use crate::game::{strategy_rewards, GameError, GameSpec, OutcomeCounts, Strategy};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchellingCurveSet {
    pub focal: (Strategy, Strategy),
    /// Agents pinned to other strategies, per slot of the variant.
    pub fixed: Vec<usize>,
    /// Number of other agents playing the first focal strategy.
    pub others: Vec<usize>,
    /// Payoff of the focal agent when it plays the first focal strategy.
    pub payoff_a: Vec<f64>,
    /// Payoff of the focal agent when it plays the second focal strategy.
    pub payoff_b: Vec<f64>,
}

/// Builds the two curves. `fixed` holds per-slot counts of agents whose strategy
/// does not vary; the focal slots must be zero there. The remaining
/// `n − 1 − Σfixed` other agents split between the two focal strategies.
pub fn schelling_curves(spec: &GameSpec, focal: (Strategy, Strategy), fixed: &[usize]) -> Result<SchellingCurveSet, GameError> {
    spec.validate()?;
    let slot = |s: Strategy| {
        spec.variant
            .index_of(s)
            .ok_or_else(|| GameError::Contract(format!("strategy {s:?} is not part of {}", spec.variant)))
    };
    let (a, b) = (slot(focal.0)?, slot(focal.1)?);
    if a == b {
        return Err(GameError::Contract("focal strategies must differ".into()));
    }
    if fixed.len() != spec.arity() {
        return Err(GameError::Contract(format!("fixed counts need {} slots, got {}", spec.arity(), fixed.len())));
    }
    if fixed[a] != 0 || fixed[b] != 0 {
        return Err(GameError::Contract("focal strategies cannot carry fixed counts".into()));
    }
    let pinned: usize = fixed.iter().sum();
    if pinned + 1 > spec.n {
        return Err(GameError::Contract(format!("{pinned} fixed agents leave no room for the focal agent")));
    }
    let free = spec.n - 1 - pinned;
    let mut set = SchellingCurveSet {
        focal,
        fixed: fixed.to_vec(),
        others: Vec::with_capacity(free + 1),
        payoff_a: Vec::with_capacity(free + 1),
        payoff_b: Vec::with_capacity(free + 1),
    };
    for m in 0..=free {
        let mut counts = fixed.to_vec();
        counts[a] = m + 1;
        counts[b] = free - m;
        let ra = strategy_rewards(spec, &OutcomeCounts(counts.clone()))?[a].expect("focal slot is occupied");
        counts[a] = m;
        counts[b] = free - m + 1;
        let rb = strategy_rewards(spec, &OutcomeCounts(counts))?[b].expect("focal slot is occupied");
        set.others.push(m);
        set.payoff_a.push(ra);
        set.payoff_b.push(rb);
    }
    Ok(set)
}
