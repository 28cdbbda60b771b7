use dilemma_core::dynamics::{project_to_floored_simplex, project_to_simplex};
use dilemma_core::geometry::{
    cartesian_to_quaternary, plot_coordinates, quaternary_to_cartesian, ternary_to_planar, BaryPoint, CartPoint3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quaternary_vertices_are_exact() {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let expected = [
        (-s2 / 4.0, s6 / 4.0, 0.0),
        (-s2 / 4.0, -s6 / 4.0, 0.0),
        (s2 / 2.0, 0.0, 0.0),
        (0.0, 0.0, 1.0),
    ];
    for (slot, (x, y, z)) in expected.into_iter().enumerate() {
        let mut w = [0.0; 4];
        w[slot] = 1.0;
        let c = quaternary_to_cartesian(&BaryPoint::new(&w).unwrap());
        assert_eq!((c.x, c.y, c.z), (x, y, z), "vertex {slot}");
    }
}

#[test]
fn quaternary_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..4).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let back = cartesian_to_quaternary(quaternary_to_cartesian(&BaryPoint::new(&w).unwrap())).unwrap();
        for (a, b) in w.iter().zip(back.weights()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn points_outside_the_tetrahedron_are_rejected() {
    assert!(cartesian_to_quaternary(CartPoint3 { x: 0.0, y: 0.0, z: 1.5 }).is_err());
    assert!(cartesian_to_quaternary(CartPoint3 { x: 2.0, y: 0.0, z: 0.0 }).is_err());
    assert!(BaryPoint::new(&[0.5, 0.6, -0.1]).is_err());
}

#[test]
fn ternary_centre_and_plot_dispatch() {
    let third = 1.0 / 3.0;
    let p = ternary_to_planar(&BaryPoint::new(&[third, third, third]).unwrap());
    assert!(p.x.abs() < 1e-15);
    assert!((p.y - 3f64.sqrt() / 6.0).abs() < 1e-15);
    assert_eq!(plot_coordinates(&[0.0, 0.0, 1.0]).unwrap(), vec![0.5, 0.0]);
    assert_eq!(plot_coordinates(&[0.0, 0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0]);
}

fn check_feasible(z: &[f64], floor: f64) {
    let sum: f64 = z.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
    assert!(z.iter().all(|&x| x >= floor - 1e-15), "{z:?}");
}

#[test]
fn projection_is_feasible_and_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for trial in 0..100_000 {
        let d = rng.gen_range(1..=8);
        let scale = [1.0, 10.0, 1e3][trial % 3];
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-scale..scale)).collect();
        let floor = if trial % 2 == 0 { 0.0 } else { rng.gen_range(0.0..1.0 / d as f64) };
        let z = project_to_floored_simplex(&v, floor).unwrap();
        check_feasible(&z, floor);
        let again = project_to_floored_simplex(&z, floor).unwrap();
        for (a, b) in z.iter().zip(&again) {
            assert!((a - b).abs() <= 1e-12, "not idempotent: {z:?} -> {again:?}");
        }
    }
}

/// Nearest feasible point by exhaustive search on a lattice of the simplex,
/// followed by zooming grid searches around the current winner.
fn grid_nearest(v: &[f64]) -> Vec<f64> {
    let dist = |z: &[f64]| z.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let lattice = 600;
    let mut best = vec![0.0; 3];
    let mut best_d = f64::INFINITY;
    for a in 0..=lattice {
        for b in 0..=lattice - a {
            let z = [a as f64 / lattice as f64, b as f64 / lattice as f64, (lattice - a - b) as f64 / lattice as f64];
            let d = dist(&z);
            if d < best_d {
                best_d = d;
                best = z.to_vec();
            }
        }
    }
    let mut half = 2.0 / lattice as f64;
    while half > 1e-10 {
        let centre = best.clone();
        for a in -20..=20 {
            for b in -20..=20 {
                let x = centre[0] + half * a as f64 / 20.0;
                let y = centre[1] + half * b as f64 / 20.0;
                let z = [x, y, 1.0 - x - y];
                if z.iter().any(|&t| t < -1e-15) {
                    continue;
                }
                let d = dist(&z);
                if d < best_d {
                    best_d = d;
                    best = z.to_vec();
                }
            }
        }
        half /= 4.0;
    }
    best
}

#[test]
fn projection_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..100 {
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let z = project_to_simplex(&v).unwrap();
        let g = grid_nearest(&v);
        let gap = z.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-6, "{v:?}: {z:?} vs {g:?}");
    }
}

proptest! {
    #[test]
    fn projection_is_no_farther_than_any_feasible_point(
        v in proptest::collection::vec(-5.0f64..5.0, 4),
        w in proptest::collection::vec(0.001f64..1.0, 4),
    ) {
        let z = project_to_simplex(&v).unwrap();
        let s: f64 = w.iter().sum();
        let other: Vec<f64> = w.iter().map(|x| x / s).collect();
        let d = |p: &[f64]| p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        prop_assert!(d(&z) <= d(&other) + 1e-12);
    }

    #[test]
    fn shifting_all_entries_does_not_move_the_projection(
        v in proptest::collection::vec(-5.0f64..5.0, 1..8),
        shift in -10.0f64..10.0,
    ) {
        let a = project_to_simplex(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let b = project_to_simplex(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}
