use dilemma_core::analytics::{
    closed_form_gradient, participation_expectation, second_order_gap, value_gradient,
};
use dilemma_core::game::{exact_value, exact_value_at, sample_outcome_with, strategy_rewards};
use dilemma_core::{GameSpec, OutcomeCounts, PolicyProfile, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn random_row(rng: &mut ChaCha8Rng, arity: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..arity).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize, arity: usize) -> PolicyProfile {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_row(rng, arity)).collect();
    PolicyProfile::new(&rows).unwrap()
}

/// Central differences of the exact value along each coordinate of the agent's
/// own row. The value is linear in that row, so the step may leave the simplex.
fn fd_gradient(spec: &GameSpec, profile: &PolicyProfile, agent: usize) -> Vec<f64> {
    let h = 1e-3;
    let own = profile.row(agent).to_vec();
    (0..own.len())
        .map(|x| {
            let mut up = own.clone();
            up[x] += h;
            let mut down = own.clone();
            down[x] -= h;
            (exact_value_at(spec, profile, agent, &up).unwrap() - exact_value_at(spec, profile, agent, &down).unwrap())
                / (2.0 * h)
        })
        .collect()
}

#[test]
fn closed_form_matches_finite_differences_of_exact_value() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for variant in [Variant::Cdn, Variant::Cdnpa, Variant::Cdnp, Variant::CdnpHomo] {
        for n in 3..=6 {
            let spec = GameSpec { n, ..GameSpec::defaults(variant) };
            for _ in 0..1000 {
                let profile = random_profile(&mut rng, n, spec.arity());
                let agent = rng.gen_range(0..n);
                let fd = fd_gradient(&spec, &profile, agent);
                // The homophily variant's V-gradient part is checked; its rate adds a non-gradient term.
                let g = if variant == Variant::CdnpHomo {
                    value_gradient(&spec, &profile, agent).unwrap()
                } else {
                    closed_form_gradient(&spec, &profile, agent).unwrap()
                };
                for (a, b) in g.as_slice().iter().zip(&fd) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    println!("max abs error {worst:.3e} in {:?}", started.elapsed());
    assert!(worst <= 1e-8, "max abs error {worst}");
    assert!(started.elapsed().as_secs() < 120);
}

#[test]
fn gradient_examples() {
    let spec = GameSpec::defaults(Variant::Cdn);
    let all_c = PolicyProfile::pure(10, 3, 0);
    let g = closed_form_gradient(&spec, &all_c, 0).unwrap();
    assert!((g[0] - 2.0).abs() < 1e-12);
    assert!((g[1] - 2.7).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let p = random_profile(&mut rng, 10, 3);
        assert_eq!(closed_form_gradient(&spec, &p, 3).unwrap()[2], 1.0);
    }
}

#[test]
fn gradient_ignores_order_of_identical_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for variant in Variant::ALL {
        let spec = GameSpec::defaults(variant);
        let twin = random_row(&mut rng, spec.arity());
        let mut rows: Vec<Vec<f64>> = (0..10).map(|_| random_row(&mut rng, spec.arity())).collect();
        rows[2] = twin.clone();
        rows[7] = twin;
        let base = closed_form_gradient(&spec, &PolicyProfile::new(&rows).unwrap(), 0).unwrap();
        rows.swap(2, 5);
        rows.swap(7, 9);
        let moved = closed_form_gradient(&spec, &PolicyProfile::new(&rows).unwrap(), 0).unwrap();
        for (a, b) in base.as_slice().iter().zip(moved.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

/// `E[1/(n − #opt-outs)]` by summing over every opt-out pattern of the
/// non-excluded agents.
fn enumerated_expectation(theta_n: &[f64], excluded: &[usize]) -> f64 {
    let n = theta_n.len();
    let free: Vec<usize> = (0..n).filter(|k| !excluded.contains(k)).collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << free.len()) {
        let mut prob = 1.0;
        let mut out = 0;
        for (bit, &k) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                prob *= theta_n[k];
                out += 1;
            } else {
                prob *= 1.0 - theta_n[k];
            }
        }
        total += prob / (n - out) as f64;
    }
    total
}

#[test]
fn participation_expectation_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=20 {
        for _ in 0..3 {
            let theta: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let i = rng.gen_range(0..n);
            let e = participation_expectation(&theta, &[i]).unwrap();
            assert!((e - enumerated_expectation(&theta, &[i])).abs() <= 1e-12, "n={n}");
            let j = (i + 1 + rng.gen_range(0..n - 1)) % n;
            let e2 = participation_expectation(&theta, &[i, j]).unwrap();
            assert!((e2 - enumerated_expectation(&theta, &[i, j])).abs() <= 1e-12, "n={n}");
        }
    }
    assert_eq!(participation_expectation(&[0.0; 10], &[0]).unwrap(), 0.1);
    assert_eq!(participation_expectation(&[1.0; 7], &[3]).unwrap(), 1.0);
    assert!((participation_expectation(&[0.5; 4], &[1]).unwrap() - 0.46875).abs() < 1e-15);
    assert!(participation_expectation(&[0.5; 4], &[]).is_err());
    assert!(participation_expectation(&[0.5; 4], &[0, 1, 2]).is_err());
}

#[test]
fn excluded_agent_does_not_move_the_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut theta: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
    let before = participation_expectation(&theta, &[2, 5]).unwrap();
    theta[2] = 0.99;
    theta[5] = 0.01;
    assert_eq!(participation_expectation(&theta, &[2, 5]).unwrap(), before);
}

#[test]
fn second_order_gap_law() {
    let spec = GameSpec::defaults(Variant::Cdnp);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_fd: f64 = 0.0;
    for trial in 0..10_000 {
        let profile = random_profile(&mut rng, spec.n, 4);
        let agent = rng.gen_range(0..spec.n);
        let gap = second_order_gap(&spec, &profile, agent).unwrap();
        let defect: f64 = (0..spec.n).filter(|&j| j != agent).map(|j| profile.row(j)[1]).sum();
        let law = -spec.k / spec.n as f64 * defect;
        assert!((gap - law).abs() <= 1e-12, "trial {trial}");
        assert!(gap <= 0.0);
        if trial < 200 {
            // Enumeration is costly at n=10, so the finite-difference check uses a subset.
            let small = GameSpec { n: 5, ..spec.clone() };
            let p = random_profile(&mut rng, 5, 4);
            let fd = fd_gradient(&small, &p, 0);
            let exact_gap = second_order_gap(&small, &p, 0).unwrap();
            worst_fd = worst_fd.max((fd[3] - fd[0] - exact_gap).abs());
        }
    }
    assert!(worst_fd <= 1e-8, "{worst_fd}");
    let mut rows = vec![vec![0.0, 0.0, 1.0, 0.0]; 10];
    rows[0] = vec![0.25; 4];
    assert_eq!(second_order_gap(&spec, &PolicyProfile::new(&rows).unwrap(), 0).unwrap(), 0.0);
    let all_d = PolicyProfile::pure(10, 4, 1);
    assert!((second_order_gap(&spec, &all_d, 0).unwrap() + 0.315).abs() < 1e-12);
    let homo = GameSpec::defaults(Variant::CdnpHomo);
    let mut rows = vec![vec![0.0, 0.0, 0.0, 1.0]; 10];
    rows[0] = vec![0.5, 0.0, 0.0, 0.5];
    assert!((second_order_gap(&homo, &PolicyProfile::new(&rows).unwrap(), 0).unwrap() - 0.2).abs() < 1e-12);
    assert!(second_order_gap(&GameSpec::defaults(Variant::Cdn), &PolicyProfile::pure(10, 3, 0), 0).is_err());
}

#[test]
fn exact_value_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for variant in Variant::ALL {
        let spec = GameSpec { n: 5, ..GameSpec::defaults(variant) };
        let profile = random_profile(&mut rng, 5, spec.arity());
        let exact = exact_value(&spec, &profile, 2).unwrap();
        let games = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..games {
            let outcome = sample_outcome_with(&profile, &mut rng);
            let mut counts = vec![0; spec.arity()];
            outcome.choices.iter().for_each(|&s| counts[s] += 1);
            let r = strategy_rewards(&spec, &OutcomeCounts(counts)).unwrap()[outcome.choices[2]].unwrap();
            sum += r;
            sq += r * r;
        }
        let mean = sum / games as f64;
        let se = ((sq / games as f64 - mean * mean) / games as f64).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "{variant:?}: {mean} vs {exact} (se {se})");
    }
}
