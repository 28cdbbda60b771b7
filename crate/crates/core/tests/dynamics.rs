use dilemma_core::dynamics::{
    classify_basin, contributing_mass, detect_limit_cycle, flow_step, integrate_flow, uniform_simplex_point,
};
use dilemma_core::geometry::{signed_area, ternary_to_planar, BaryPoint};
use dilemma_core::{BasinLabel, FlowParams, GameSpec, PolicyProfile, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn cdnp_flow_settles_on_a_recurrent_orbit() {
    let spec = GameSpec::defaults(Variant::Cdnp);
    let start = PolicyProfile::symmetric(10, &[0.2, 0.3, 0.3, 0.2]).unwrap();
    let traj = integrate_flow(&spec, &start, &FlowParams::default(), 1_000_000, 100).unwrap();
    let transient = traj.len() / 2;
    let cycle = detect_limit_cycle(&traj, 1e-3, transient).expect("no recurrence");
    assert!(cycle.revolutions >= 3, "{} revolutions", cycle.revolutions);
    assert!(cycle.period > 0.0);
    // Not a fixed point: the orbit spans a visible loop.
    let tail = &traj.points[transient..];
    let spread = tail.iter().map(|p| distance(p, &cycle.anchor)).fold(0.0, f64::max);
    assert!(spread > 0.1, "spread {spread}");
    assert!(tail.iter().all(|p| contributing_mass(p) < 0.9));
}

#[test]
fn punishers_are_invaded_without_homophily_and_held_with_it() {
    let near_p = [0.02, 0.02, 0.02, 0.94];
    let p_vertex = [0.0, 0.0, 0.0, 1.0];
    let start = PolicyProfile::symmetric(10, &near_p).unwrap();
    let params = FlowParams::default();

    let plain = integrate_flow(&GameSpec::defaults(Variant::Cdnp), &start, &params, 100_000, 1000).unwrap();
    let punish: Vec<f64> = plain.points.iter().map(|p| p[3]).collect();
    assert!(punish.windows(2).skip(5).all(|w| w[1] < w[0]), "punishing mass should keep falling");
    assert!(distance(plain.points.last().unwrap(), &p_vertex) > 0.1);

    let homo = integrate_flow(&GameSpec::defaults(Variant::CdnpHomo), &start, &params, 100_000, 1000).unwrap();
    assert!(homo.points.iter().all(|p| distance(p, &p_vertex) < 0.1));
}

#[test]
fn cdn_rotates_counterclockwise() {
    let spec = GameSpec::defaults(Variant::Cdn);
    for row in [[0.34, 0.33, 0.33], [0.4, 0.3, 0.3], [0.3, 0.3, 0.4]] {
        let start = PolicyProfile::symmetric(10, &row).unwrap();
        let traj = integrate_flow(&spec, &start, &FlowParams::unfloored(1e-3), 200_000, 100).unwrap();
        let planar: Vec<_> = traj.points.iter().map(|p| ternary_to_planar(&BaryPoint::new(p).unwrap())).collect();
        assert!(signed_area(&planar) > 0.0, "start {row:?}");
    }
}

#[test]
fn integration_is_deterministic_and_steps_match() {
    let spec = GameSpec::defaults(Variant::CdnpHomo);
    let start = PolicyProfile::new(&[vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1], vec![0.25; 4]]).unwrap();
    let spec = GameSpec { n: 3, ..spec };
    let params = FlowParams::default();
    let a = integrate_flow(&spec, &start, &params, 50, 7).unwrap();
    let b = integrate_flow(&spec, &start, &params, 50, 7).unwrap();
    assert_eq!(a, b);
    let one = integrate_flow(&spec, &start, &params, 1, 1).unwrap();
    assert_eq!(one.profiles[1], flow_step(&spec, &start, &params).unwrap());
}

#[test]
fn cdnp_starts_never_reach_cooperation() {
    let spec = GameSpec::defaults(Variant::Cdnp);
    let params = FlowParams { max_steps: 50_000, ..FlowParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..40 {
        let start = PolicyProfile::symmetric(10, &uniform_simplex_point(&mut rng, 4)).unwrap();
        assert_ne!(classify_basin(&spec, &start, &params).unwrap().label, BasinLabel::Cooperative);
    }
}
