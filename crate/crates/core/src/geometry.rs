//! Plot coordinates for population points.
//!
//! Quaternary points live in a regular tetrahedron of unit height with vertices
//! `P(0, 0, 1)`, `N(√2/2, 0, 0)`, `C(−√2/4, √6/4, 0)` and `D(−√2/4, −√6/4, 0)`.
//! Each barycentric weight is the distance to the face opposite its vertex.
//!
//! Ternary points use an equilateral triangle of unit side with `C` on top and
//! `D`, `N` at the bottom left and right, so the cycle `C → D → N` runs
//! counterclockwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const SQRT6: f64 = 2.449_489_742_783_178;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Tolerance for points on the boundary of the simplex.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("barycentric weights must be nonnegative and sum to 1: {0:?}")]
    InvalidBary(Vec<f64>),
    #[error("point ({0}, {1}, {2}) lies outside the tetrahedron")]
    OutsideTetrahedron(f64, f64, f64),
}

/// Weights `(p_C, p_D, p_N)` or `(p_C, p_D, p_N, p_P)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaryPoint(Vec<f64>);

impl BaryPoint {
    pub fn new(weights: &[f64]) -> Result<Self, GeometryError> {
        let sum: f64 = weights.iter().sum();
        if !(3..=4).contains(&weights.len())
            || weights.iter().any(|w| !w.is_finite() || *w < -BOUNDARY_TOLERANCE)
            || (sum - 1.0).abs() > BOUNDARY_TOLERANCE
        {
            return Err(GeometryError::InvalidBary(weights.to_vec()));
        }
        Ok(BaryPoint(weights.to_vec()))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoint2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Tetrahedron vertices in `(C, D, N, P)` order.
pub const TETRA_VERTICES: [CartPoint3; 4] = [
    CartPoint3 { x: -SQRT2 / 4.0, y: SQRT6 / 4.0, z: 0.0 },
    CartPoint3 { x: -SQRT2 / 4.0, y: -SQRT6 / 4.0, z: 0.0 },
    CartPoint3 { x: SQRT2 / 2.0, y: 0.0, z: 0.0 },
    CartPoint3 { x: 0.0, y: 0.0, z: 1.0 },
];

/// Triangle vertices in `(C, D, N)` order.
pub const TRIANGLE_VERTICES: [CartPoint2; 3] = [
    CartPoint2 { x: 0.0, y: SQRT3 / 2.0 },
    CartPoint2 { x: -0.5, y: 0.0 },
    CartPoint2 { x: 0.5, y: 0.0 },
];

/// Quaternary weights `(p_C, p_D, p_N, p_P)` to Cartesian coordinates.
///
/// The `y` sign is fixed by the vertex list: `y = (√6/4)(p_C − p_D)`.
pub fn quaternary_to_cartesian(b: &BaryPoint) -> CartPoint3 {
    let w = b.weights();
    assert_eq!(w.len(), 4, "quaternary point needs four weights");
    let (pc, pd, pp) = (w[0], w[1], w[3]);
    CartPoint3 { x: SQRT2 / 4.0 * (2.0 - 3.0 * pd - 3.0 * pc - 2.0 * pp), y: SQRT6 / 4.0 * (pc - pd), z: pp }
}

/// Inverse of [`quaternary_to_cartesian`] from point-to-face distances.
pub fn cartesian_to_quaternary(c: CartPoint3) -> Result<BaryPoint, GeometryError> {
    // Signed distances; all are nonnegative inside the tetrahedron.
    let pd = (1.0 - SQRT2 * c.x - SQRT6 * c.y - c.z) / 3.0;
    let pc = (1.0 - SQRT2 * c.x + SQRT6 * c.y - c.z) / 3.0;
    let pp = c.z;
    let pn = 1.0 - pc - pd - pp;
    let w = [pc, pd, pn, pp];
    if w.iter().any(|v| !v.is_finite() || *v < -BOUNDARY_TOLERANCE) {
        return Err(GeometryError::OutsideTetrahedron(c.x, c.y, c.z));
    }
    Ok(BaryPoint(w.iter().map(|v| v.max(0.0)).collect()))
}

/// Ternary weights `(p_C, p_D, p_N)` to planar coordinates.
pub fn ternary_to_planar(b: &BaryPoint) -> CartPoint2 {
    let w = b.weights();
    assert_eq!(w.len(), 3, "ternary point needs three weights");
    let (x, y) = w.iter().zip(TRIANGLE_VERTICES).fold((0.0, 0.0), |(x, y), (wi, v)| (x + wi * v.x, y + wi * v.y));
    CartPoint2 { x, y }
}

/// Signed area of a polyline closed back to its first point (shoelace formula).
/// Positive for counterclockwise traversal.
pub fn signed_area(points: &[CartPoint2]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (a, b) in points.iter().zip(points.iter().cycle().skip(1)) {
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Net number of counterclockwise turns a polyline makes around `centre`.
pub fn winding_turns(points: &[CartPoint2], centre: CartPoint2) -> f64 {
    use std::f64::consts::PI;
    let angle = |p: &CartPoint2| (p.y - centre.y).atan2(p.x - centre.x);
    let mut total = 0.0;
    for w in points.windows(2) {
        let mut d = angle(&w[1]) - angle(&w[0]);
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    total / (2.0 * PI)
}

/// Plot coordinates of a population point: planar for three strategies,
/// Cartesian 3-D for four.
pub fn plot_coordinates(weights: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let b = BaryPoint::new(weights)?;
    Ok(match weights.len() {
        3 => {
            let p = ternary_to_planar(&b);
            vec![p.x, p.y]
        }
        _ => {
            let p = quaternary_to_cartesian(&b);
            vec![p.x, p.y, p.z]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vertices_map_to_listed_coordinates() {
        for (slot, v) in TETRA_VERTICES.iter().enumerate() {
            let mut w = vec![0.0; 4];
            w[slot] = 1.0;
            let c = quaternary_to_cartesian(&BaryPoint::new(&w).unwrap());
            assert_abs_diff_eq!(c.x, v.x, epsilon = 1e-15);
            assert_abs_diff_eq!(c.y, v.y, epsilon = 1e-15);
            assert_abs_diff_eq!(c.z, v.z, epsilon = 1e-15);
        }
    }

    #[test]
    fn centroid() {
        let c = quaternary_to_cartesian(&BaryPoint::new(&[0.25; 4]).unwrap());
        assert_abs_diff_eq!(c.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.z, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn inverse_at_vertices() {
        let p = cartesian_to_quaternary(CartPoint3 { x: 0.0, y: 0.0, z: 1.0 }).unwrap();
        assert_abs_diff_eq!(p.weights()[3], 1.0, epsilon = 1e-15);
        let c = cartesian_to_quaternary(TETRA_VERTICES[0]).unwrap();
        for (got, want) in c.weights().iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn outside_point_rejected() {
        assert!(cartesian_to_quaternary(CartPoint3 { x: 0.0, y: 0.0, z: 1.5 }).is_err());
        assert!(cartesian_to_quaternary(CartPoint3 { x: 2.0, y: 0.0, z: 0.1 }).is_err());
    }

    #[test]
    fn ternary_layout() {
        let c = ternary_to_planar(&BaryPoint::new(&[1.0, 0.0, 0.0]).unwrap());
        assert_eq!(c, TRIANGLE_VERTICES[0]);
        let g = ternary_to_planar(&BaryPoint::new(&[1.0 / 3.0; 3]).unwrap());
        assert_abs_diff_eq!(g.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.y, SQRT3 / 6.0, epsilon = 1e-15);
        let mid = ternary_to_planar(&BaryPoint::new(&[0.5, 0.5, 0.0]).unwrap());
        assert_abs_diff_eq!(mid.x, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(mid.y, SQRT3 / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn c_d_n_cycle_is_counterclockwise() {
        assert!(signed_area(&TRIANGLE_VERTICES) > 0.0);
        let mut tour = TRIANGLE_VERTICES.to_vec();
        tour.push(TRIANGLE_VERTICES[0]);
        let centre = CartPoint2 { x: 0.0, y: SQRT3 / 6.0 };
        assert_abs_diff_eq!(winding_turns(&tour, centre), 1.0, epsilon = 1e-12);
        tour.reverse();
        assert_abs_diff_eq!(winding_turns(&tour, centre), -1.0, epsilon = 1e-12);
    }
}
