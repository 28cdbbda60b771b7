use dilemma_ssd::xmeans::{same_partition, synthetic_behaviour_groups, xmeans};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn recovers_two_behaviour_groups() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, truth) = synthetic_behaviour_groups(20, 5.0, &mut rng);
        let c = xmeans(&data, 2, 4, &mut rng);
        if c.k() == 2 && same_partition(&c.labels, &truth) {
            hits += 1;
        }
    }
    println!("exact recoveries: {hits}/100");
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn partition_comparison_ignores_label_names() {
    assert!(same_partition(&[0, 0, 1, 2], &[2, 2, 0, 1]));
    assert!(!same_partition(&[0, 0, 1, 1], &[0, 1, 1, 1]));
    assert!(!same_partition(&[0], &[0, 0]));
}
