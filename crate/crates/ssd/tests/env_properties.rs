use dilemma_ssd::env::{Cell, EnvAction, EnvConfig, GameKind, IncentiveKind, SsdEnv};
use dilemma_ssd::log::{EpisodeLog, LogError, LogRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_actions(n: usize, rng: &mut ChaCha8Rng) -> (Vec<EnvAction>, Vec<Vec<IncentiveKind>>) {
    let actions = (0..n).map(|_| EnvAction::ALL[rng.gen_range(0..EnvAction::COUNT)]).collect();
    let incentives = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { IncentiveKind::Zero } else { IncentiveKind::ALL[rng.gen_range(0..3)] })
                .collect()
        })
        .collect();
    (actions, incentives)
}

fn play(cfg: &EnvConfig, seed: u64, action_seed: u64) -> (EpisodeLog, Vec<SsdEnv>) {
    let (mut env, _) = SsdEnv::reset(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let mut log = EpisodeLog::new(cfg, seed);
    let mut states = vec![env.clone()];
    while !env.is_done() {
        let (actions, incentives) = random_actions(cfg.n_agents, &mut rng);
        let out = env.step(&actions, &incentives).unwrap();
        log.records.push(LogRecord { step: env.step_count() - 1, actions, incentives, rewards: out.rewards });
        states.push(env.clone());
    }
    (log, states)
}

#[test]
fn replay_from_seed_and_actions_is_bit_exact() {
    for cfg in [EnvConfig::cleanup(3).unwrap(), EnvConfig::cleanup(5).unwrap(), EnvConfig::harvest(4)] {
        for seed in 0..3 {
            let (log, states) = play(&cfg, seed, 100 + seed);
            let mut buf = Vec::new();
            log.write_ndjson(&mut buf).unwrap();
            let parsed = EpisodeLog::read_ndjson(buf.as_slice()).unwrap();
            assert_eq!(parsed, log);
            let final_env = parsed.replay().unwrap();
            assert_eq!(&final_env, states.last().unwrap());

            let (mut env, _) = SsdEnv::reset(&cfg, seed).unwrap();
            for (r, expected) in parsed.records.iter().zip(&states[1..]) {
                env.step(&r.actions, &r.incentives).unwrap();
                assert_eq!(&env, expected, "state diverged at step {}", r.step);
            }
        }
    }
}

#[test]
fn tampered_log_is_rejected() {
    let cfg = EnvConfig::cleanup(3).unwrap();
    let (mut log, _) = play(&cfg, 5, 6);
    log.records[10].rewards.cost[0] += 1.0;
    assert!(matches!(log.replay(), Err(LogError::Diverged(10))));
}

#[test]
fn same_seed_same_state() {
    let cfg = EnvConfig::cleanup(10).unwrap();
    let (a, oa) = SsdEnv::reset(&cfg, 42).unwrap();
    let (b, ob) = SsdEnv::reset(&cfg, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(oa, ob);
}

#[test]
fn table_one_presets() {
    let expected = [
        (3, (10, 10), 7, 50, 0.3, 0.4, 0.0, 0.5),
        (5, (18, 25), 15, 100, 0.05, 0.99, 0.0, 0.05),
        (10, (18, 48), 15, 100, 0.05, 0.99, 0.0, 0.05),
    ];
    for (n, dims, view, steps, apple, depletion, restoration, waste) in expected {
        let cfg = EnvConfig::cleanup(n).unwrap();
        assert_eq!(cfg.game, GameKind::Cleanup);
        assert_eq!(cfg.view_size, view);
        assert_eq!(cfg.max_steps, steps);
        assert_eq!(cfg.apple_respawn, apple);
        assert_eq!(cfg.depletion_threshold, depletion);
        assert_eq!(cfg.restoration_threshold, restoration);
        assert_eq!(cfg.waste_spawn, waste);
        assert_eq!((cfg.eta_e, cfg.eta_c, cfg.incentive_magnitude), (1.0, 0.1, 1.0));
        let (env, obs) = SsdEnv::reset(&cfg, 0).unwrap();
        assert_eq!(env.dims(), dims);
        assert_eq!(obs.len(), n);
        assert!(obs.iter().all(|o| o.side == view && o.cells.len() == view * view));
        assert!(env.waste_density() > depletion);
        assert!(!env.is_done());
    }
    assert!(EnvConfig::cleanup(4).is_err());
    assert_eq!(EnvConfig::harvest(3).harvest_spawn, [0.0, 0.05, 0.08, 0.1]);
}

fn idle(n: usize) -> (Vec<EnvAction>, Vec<Vec<IncentiveKind>>) {
    (vec![EnvAction::Stay; n], vec![vec![IncentiveKind::Zero; n]; n])
}

/// Steps an idle episode that never ends, clearing the grid before each tick so
/// every apple-field and waste-field cell stays eligible.
fn cleanup_audit(n: usize, min_trials: u64) -> (f64, f64, f64, f64) {
    let mut cfg = EnvConfig::cleanup(n).unwrap();
    cfg.max_steps = usize::MAX;
    let (mut env, _) = SsdEnv::reset(&cfg, 11).unwrap();
    let (a, inc) = idle(n);
    while env.audit().apple_trials < min_trials || env.audit().waste_trials < min_trials {
        env.clear_waste();
        env.clear_apples();
        env.step(&a, &inc).unwrap();
    }
    let au = env.audit();
    (
        au.apple_spawns as f64 / au.apple_trials as f64,
        au.apple_probability_sum / au.apple_trials as f64,
        au.waste_spawns as f64 / au.waste_trials as f64,
        au.waste_probability_sum / au.waste_trials as f64,
    )
}

#[test]
fn cleanup_spawn_frequencies_match_configuration() {
    for (n, apple, waste) in [(3, 0.3, 0.5), (5, 0.05, 0.05)] {
        let (apple_freq, apple_p, waste_freq, waste_p) = cleanup_audit(n, 1_000_000);
        assert!((apple_p - apple).abs() < 1e-9);
        assert!((waste_p - waste).abs() < 1e-9);
        assert!((apple_freq - apple).abs() <= 0.005, "n={n} apple {apple_freq}");
        assert!((waste_freq - waste).abs() <= 0.005, "n={n} waste {waste_freq}");
    }
}

#[test]
fn harvest_spawn_frequencies_match_neighbour_table() {
    let cfg = EnvConfig { max_steps: 100, ..EnvConfig::harvest(2) };
    let (a, inc) = idle(2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut trials, mut spawns) = ([0u64; 4], [0u64; 4]);
    let mut episode = 0;
    while trials[1..].iter().any(|&t| t < 1_000_000) {
        let (mut env, _) = SsdEnv::reset(&cfg, episode).unwrap();
        let (rows, cols) = env.dims();
        while !env.is_done() {
            // Periodic thinning of the full initial field populates every neighbour class.
            if env.step_count() % 10 == 0 {
                for r in 0..rows {
                    for c in 0..cols {
                        if rng.gen::<f64>() < 0.35 {
                            env.remove_apple(r, c);
                        }
                    }
                }
            }
            env.step(&a, &inc).unwrap();
        }
        for class in 0..4 {
            trials[class] += env.audit().harvest_trials[class];
            spawns[class] += env.audit().harvest_spawns[class];
        }
        episode += 1;
    }
    println!("harvest trials per class: {trials:?} over {episode} episodes");
    assert!(trials[0] > 0);
    assert_eq!(spawns[0], 0);
    for class in 1..4 {
        let freq = spawns[class] as f64 / trials[class] as f64;
        assert!((freq - cfg.harvest_spawn[class]).abs() <= 0.005, "class {class}: {freq}");
    }
}

#[test]
fn apples_only_change_by_spawn_or_consumption() {
    let cfg = EnvConfig::cleanup(3).unwrap();
    let (mut env, _) = SsdEnv::reset(&cfg, 8).unwrap();
    env.clear_waste();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    while !env.is_done() {
        let before = env.apple_count() as i64;
        let spawned_before = env.audit().apple_spawns as i64;
        let eaten_before: u64 = env.apples_eaten().iter().sum();
        let (actions, incentives) = random_actions(3, &mut rng);
        env.step(&actions, &incentives).unwrap();
        let spawned = env.audit().apple_spawns as i64 - spawned_before;
        let eaten = (env.apples_eaten().iter().sum::<u64>() - eaten_before) as i64;
        assert_eq!(env.apple_count() as i64, before + spawned - eaten);
    }
}

#[test]
fn incentives_are_conserved() {
    let cfg = EnvConfig::harvest(5);
    let (mut env, _) = SsdEnv::reset(&cfg, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let (actions, incentives) = random_actions(5, &mut rng);
        let out = env.step(&actions, &incentives).unwrap();
        let sent: f64 = incentives.iter().flatten().map(|k| k.sign()).sum();
        let magnitude: f64 = incentives.iter().flatten().map(|k| k.sign().abs()).sum();
        let delivered: f64 = out.incentives.iter().map(|r| r.delivered).sum();
        assert_eq!(delivered / cfg.eta_e, sent);
        assert!((out.rewards.cost.iter().sum::<f64>() - cfg.eta_c * magnitude).abs() < 1e-12);
        assert_eq!(out.rewards.received.iter().sum::<f64>(), delivered);
        for r in &out.incentives {
            if r.kind == IncentiveKind::Zero {
                assert_eq!((r.delivered, r.cost), (0.0, 0.0));
            }
            assert!(r.cost >= 0.0);
        }
    }
}

#[test]
fn views_agree_on_the_shared_grid() {
    let cfg = EnvConfig::cleanup(5).unwrap();
    let (mut env, _) = SsdEnv::reset(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let (actions, incentives) = random_actions(5, &mut rng);
        let out = env.step(&actions, &incentives).unwrap();
        let half = (cfg.view_size / 2) as isize;
        let mut seen = std::collections::HashMap::new();
        for (i, obs) in out.observations.iter().enumerate() {
            let (r0, c0) = env.position(i);
            for dr in 0..obs.side {
                for dc in 0..obs.side {
                    let r = r0 as isize + dr as isize - half;
                    let c = c0 as isize + dc as isize - half;
                    let (cell, agent) = obs.at(dr, dc);
                    let (rows, cols) = env.dims();
                    if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
                        assert_eq!((cell, agent), (Cell::Wall, None));
                        continue;
                    }
                    let key = (r, c);
                    if let Some(prev) = seen.insert(key, (cell, agent)) {
                        assert_eq!(prev, (cell, agent), "views disagree at {key:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn centred_view_has_no_padding() {
    let text = "@@@@@@@@@\n@       @\n@       @\n@       @\n@   P   @\n@       @\n@       @\n@       @\n@@@@@@@@@\n";
    let cfg = EnvConfig { map_text: Some(text.into()), n_agents: 1, view_size: 7, ..EnvConfig::harvest(1) };
    let (env, obs) = SsdEnv::reset(&cfg, 0).unwrap();
    assert_eq!(env.position(0), (4, 4));
    let walls = obs[0].cells.iter().filter(|&&c| c == Cell::Wall).count();
    assert_eq!(obs[0].cells.len(), 49);
    assert_eq!(walls, 0);
}
