//! Euclidean projection onto the probability simplex.

use super::DynamicsError;

/// Nearest point of the canonical simplex to `weights` (sort-and-threshold method).
pub fn project_to_simplex(weights: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    project_to_floored_simplex(weights, 0.0)
}

/// Nearest point of `{z : z_i >= floor, Σ z_i = 1}`.
///
/// That set is the canonical simplex shrunk by `1 − d·floor` and shifted by `floor`,
/// so the projection reduces to the canonical one after an affine change of variables.
pub fn project_to_floored_simplex(weights: &[f64], floor: f64) -> Result<Vec<f64>, DynamicsError> {
    if weights.is_empty() {
        return Err(DynamicsError::Contract("cannot project an empty vector".into()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(DynamicsError::NonFinite(weights.to_vec()));
    }
    check_floor(floor, weights.len())?;
    let mut out = weights.to_vec();
    project_in_place(&mut out, floor);
    Ok(out)
}

pub(crate) fn check_floor(floor: f64, arity: usize) -> Result<(), DynamicsError> {
    if !(0.0..1.0 / arity as f64).contains(&floor) {
        return Err(DynamicsError::Contract(format!("floor must lie in [0, 1/{arity}), got {floor}")));
    }
    Ok(())
}

/// Allocation-free projection used by the integrators. Inputs must be finite.
pub(crate) fn project_in_place(v: &mut [f64], floor: f64) {
    let d = v.len();
    let mass = 1.0 - d as f64 * floor;
    let mut sorted = [0.0f64; 8];
    let mut heap;
    let u: &mut [f64] = if d <= sorted.len() {
        &mut sorted[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    for (ui, vi) in u.iter_mut().zip(v.iter()) {
        *ui = *vi - floor;
    }
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - mass) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - floor - tau).max(0.0) + floor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_input() {
        let p = project_to_simplex(&[0.5, 0.5, 0.5]).unwrap();
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn feasible_input_is_fixed() {
        assert_eq!(project_to_simplex(&[0.2, 0.3, 0.5]).unwrap(), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn clips_to_vertex() {
        assert_eq!(project_to_simplex(&[1.2, -0.1, 0.1]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn floored_projection_respects_floor() {
        let p = project_to_floored_simplex(&[2.0, -1.0, 0.0, 0.0], 0.01).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert!(p.iter().all(|&x| x >= 0.01 - 1e-15));
        assert_abs_diff_eq!(p[0], 0.97, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_finite_and_bad_floor() {
        assert!(matches!(project_to_simplex(&[f64::NAN, 0.0]), Err(DynamicsError::NonFinite(_))));
        assert!(project_to_floored_simplex(&[0.5, 0.5], 0.5).is_err());
    }
}
