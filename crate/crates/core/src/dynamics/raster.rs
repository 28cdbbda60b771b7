//! Gradient fields on a barycentric grid of symmetric profiles.

use super::{project_in_place, DynamicsError, SymmetricKernel};
use crate::game::GameSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    /// Shared row of all agents.
    pub point: Vec<f64>,
    /// Gradient (or homophily rate) of each agent at that profile.
    pub rate: Vec<f64>,
    /// Direction the projected flow actually moves: `(Π(x + β·rate) − x) / β`.
    pub direction: Vec<f64>,
}

/// All points of the `arity`-simplex whose coordinates are multiples of
/// `1 / (resolution − 1)`, in lexicographic order of the integer weights.
pub fn simplex_grid(arity: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn compositions(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=left).rev() {
            prefix.push(first);
            compositions(left - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let total = resolution.saturating_sub(1);
    let mut raw = Vec::new();
    compositions(total, arity, &mut Vec::new(), &mut raw);
    raw.into_iter().map(|c| c.into_iter().map(|k| k as f64 / total as f64).collect()).collect()
}

/// Evaluates the flow rate on the grid of [`simplex_grid`] with `beta` used for the
/// projected direction.
pub fn field_raster(spec: &GameSpec, resolution: usize, beta: f64) -> Result<Vec<FieldPoint>, DynamicsError> {
    if resolution < 2 {
        return Err(DynamicsError::Contract(format!("resolution must be at least 2, got {resolution}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(DynamicsError::Contract(format!("beta must be positive, got {beta}")));
    }
    spec.validate()?;
    let mut kernel = SymmetricKernel::new(spec.n);
    Ok(simplex_grid(spec.arity(), resolution)
        .into_iter()
        .map(|point| {
            let rate = kernel.rate(spec, &point);
            let mut moved: Vec<f64> = point.iter().zip(&rate).map(|(x, r)| x + beta * r).collect();
            project_in_place(&mut moved, 0.0);
            let direction = moved.iter().zip(&point).map(|(y, x)| (y - x) / beta).collect();
            FieldPoint { point, rate, direction }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Variant, N};

    #[test]
    fn triangular_point_count() {
        let spec = GameSpec::defaults(Variant::Cdn);
        for r in 2..12 {
            assert_eq!(field_raster(&spec, r, 1e-3).unwrap().len(), r * (r + 1) / 2);
        }
        assert_eq!(simplex_grid(4, 5).len(), 35);
    }

    #[test]
    fn n_rate_is_sigma_everywhere() {
        let spec = GameSpec::defaults(Variant::Cdn);
        for fp in field_raster(&spec, 6, 1e-3).unwrap() {
            assert_eq!(fp.rate[N], spec.sigma);
        }
    }

    #[test]
    fn resolution_one_rejected() {
        assert!(field_raster(&GameSpec::defaults(Variant::Cdn), 1, 1e-3).is_err());
    }
}
