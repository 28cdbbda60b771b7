//! Recurrence detection on recorded trajectories.

use super::Trajectory;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// Mean gap between returns, in flow steps.
    pub period: f64,
    /// First snapshot after the transient; returns are measured against it.
    pub anchor: Vec<f64>,
    /// Number of returns to the anchor.
    pub revolutions: usize,
    /// Interpolated step index of each return.
    pub return_steps: Vec<f64>,
}

/// Distance from `q` to the segment `[a, b]` and the segment parameter of the
/// closest point.
fn segment_distance(a: &[f64], b: &[f64], q: &[f64]) -> (f64, f64) {
    let mut ab2 = 0.0;
    let mut dot = 0.0;
    for ((x, y), z) in a.iter().zip(b).zip(q) {
        ab2 += (y - x) * (y - x);
        dot += (z - x) * (y - x);
    }
    let t = if ab2 > 0.0 { (dot / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let d2: f64 = a.iter().zip(b).zip(q).map(|((x, y), z)| (x + t * (y - x) - z).powi(2)).sum();
    (d2.sqrt(), t)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Looks for returns to the first post-transient snapshot.
///
/// The path must first leave the `2·eps` ball around the anchor; a return is then
/// counted when a segment between consecutive snapshots passes within `eps` of it.
/// A trajectory that never leaves the ball (a fixed point) has no cycle.
pub fn detect_limit_cycle(traj: &Trajectory, eps: f64, transient: usize) -> Option<CycleReport> {
    if transient + 2 > traj.points.len() || !(eps > 0.0) {
        return None;
    }
    let anchor = &traj.points[transient];
    let leave = 2.0 * eps;
    let mut away = false;
    let mut return_steps = Vec::new();
    for k in transient..traj.points.len() - 1 {
        let (a, b) = (&traj.points[k], &traj.points[k + 1]);
        if !away {
            if distance(b, anchor) > leave {
                away = true;
            }
            continue;
        }
        let (d, t) = segment_distance(a, b, anchor);
        if d <= eps {
            let (s0, s1) = (traj.steps[k] as f64, traj.steps[k + 1] as f64);
            return_steps.push(s0 + t * (s1 - s0));
            away = false;
        }
    }
    if return_steps.is_empty() {
        return None;
    }
    let start = traj.steps[transient] as f64;
    let mut previous = start;
    let mut total = 0.0;
    for &s in &return_steps {
        total += s - previous;
        previous = s;
    }
    Some(CycleReport {
        period: total / return_steps.len() as f64,
        anchor: anchor.clone(),
        revolutions: return_steps.len(),
        return_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trajectory(points: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            steps: (0..points.len()).collect(),
            points,
            profiles: Vec::new(),
            beta: 1e-3,
            floor: 0.0,
            spec_fingerprint: String::new(),
        }
    }

    #[test]
    fn constant_trajectory_has_no_cycle() {
        let t = trajectory(vec![vec![0.3, 0.3, 0.4]; 500]);
        assert!(detect_limit_cycle(&t, 1e-3, 10).is_none());
    }

    #[test]
    fn circle_period_is_points_per_revolution() {
        // Circle of radius 0.1 around the centroid in the plane Σx = 1, sampled
        // with a step length that gives exactly 250 points per revolution.
        let per_rev = 250;
        let u = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let v = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
        let points: Vec<Vec<f64>> = (0..per_rev * 4 + 1)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / per_rev as f64;
                (0..3).map(|i| 1.0 / 3.0 + 0.1 * (a.cos() * u[i] + a.sin() * v[i])).collect()
            })
            .collect();
        let r = detect_limit_cycle(&trajectory(points), 1e-3, 0).unwrap();
        assert_eq!(r.revolutions, 4);
        assert_abs_diff_eq!(r.period, per_rev as f64, epsilon = 1e-6);
    }
}
