use dilemma_core::analytics::{bilevel_incentive_gradient, stateless_homophily_loss, BilevelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Post-update value of `agent` after every agent takes one gradient step on its
/// cooperation probability.
fn two_step_value(bp: &BilevelParams, agent: usize) -> f64 {
    let n = bp.n as f64;
    let total2: f64 = bp.theta2.iter().sum();
    let updated: Vec<f64> = (0..bp.n)
        .map(|j| bp.theta1[j] + bp.beta * (bp.b / n - bp.c + bp.p / n * (total2 - bp.theta2[j])))
        .collect();
    let own = updated[agent];
    let mut v = (bp.b / n - bp.c) * own;
    for j in (0..bp.n).filter(|&j| j != agent) {
        v += bp.b / n * updated[j] - bp.p / n * (1.0 - own) * bp.theta2[j] - bp.k / n * bp.theta2[agent] * (1.0 - updated[j]);
    }
    v
}

fn fd_bilevel(bp: &BilevelParams, agent: usize) -> f64 {
    let h = 1e-4;
    let mut up = bp.clone();
    up.theta2[agent] += h;
    let mut down = bp.clone();
    down.theta2[agent] -= h;
    (two_step_value(&up, agent) - two_step_value(&down, agent)) / (2.0 * h)
}

fn params(theta1: Vec<f64>, theta2: Vec<f64>, beta: f64) -> BilevelParams {
    BilevelParams { n: theta1.len(), b: 3.0, c: 1.0, p: 2.0, k: 0.35, beta, theta1, theta2 }
}

#[test]
fn symmetric_half_matches_two_step_procedure() {
    let bp = params(vec![0.5; 10], vec![0.5; 10], 0.01);
    let g = bilevel_incentive_gradient(&bp, 0).unwrap();
    assert!((g - fd_bilevel(&bp, 0)).abs() <= 1e-8, "{g} vs {}", fd_bilevel(&bp, 0));
}

#[test]
fn random_instances_match_two_step_procedure() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let n = rng.gen_range(2..12);
        let bp = params(
            (0..n).map(|_| rng.gen()).collect(),
            (0..n).map(|_| rng.gen_range(0.01..0.99)).collect(),
            rng.gen_range(0.0..0.1),
        );
        let agent = rng.gen_range(0..n);
        let g = bilevel_incentive_gradient(&bp, agent).unwrap();
        assert!((g - fd_bilevel(&bp, agent)).abs() <= 1e-8);
    }
}

#[test]
fn without_inner_step_only_exploitation_remains() {
    let theta1 = vec![0.2, 0.9, 0.4, 1.0, 0.0];
    let bp = params(theta1.clone(), vec![0.3; 5], 0.0);
    let expected = -0.35 / 5.0 * (0.8 + 0.6 + 0.0 + 1.0);
    assert!((bilevel_incentive_gradient(&bp, 1).unwrap() - expected).abs() < 1e-15);
    let cooperative = params(vec![1.0; 5], vec![0.3; 5], 0.0);
    assert_eq!(bilevel_incentive_gradient(&cooperative, 2).unwrap(), 0.0);
}

#[test]
fn homophily_loss_matches_triple_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = 4;
        let t1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let t2: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let i = rng.gen_range(0..n);
        let mut direct = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j == i || k == i || k == j {
                    continue;
                }
                let agree = t1[i] * t1[j] + (1.0 - t1[i]) * (1.0 - t1[j]);
                let cross = t2[j] * t2[i].ln() + (1.0 - t2[j]) * (1.0 - t2[i]).ln();
                direct -= (1.0 - t1[k]) * agree * cross;
            }
        }
        let loss = stateless_homophily_loss(&t1, &t2, i).unwrap();
        assert!((loss - direct).abs() <= 1e-12, "{loss} vs {direct}");
    }
}

#[test]
fn homophily_loss_domain() {
    assert_eq!(stateless_homophily_loss(&[1.0; 5], &[0.3, 0.6, 0.2, 0.9, 0.5], 0).unwrap(), 0.0);
    assert!(stateless_homophily_loss(&[0.5; 3], &[0.0, 0.5, 0.5], 0).is_err());
    assert!(stateless_homophily_loss(&[0.5; 3], &[1.0, 0.5, 0.5], 0).is_err());
    assert!(stateless_homophily_loss(&[0.5; 3], &[0.5; 2], 0).is_err());
}
