use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use discwalk::baselines::{beck_fiala, gram_schmidt_walk, random_coloring};
use discwalk::instance::{
    brute_force_min_disc, canonicalize, discrepancy, gen_random_regular, gen_random_regular_with, parse_instance,
    write_instance, Entry, SetSystem, SignModel,
};
use discwalk::rounding::round_full;
use discwalk::walk::{parse_coloring, run_walk, write_coloring, PotentialMode, SamplerMode, WalkConfig};

fn all_ones(n: usize) -> SetSystem {
    let entries = (0..n).flat_map(|i| (0..n).map(move |j| Entry { row: i, col: j, sign: 1 })).collect();
    SetSystem::new(n, n, n, entries).unwrap()
}

#[test]
fn walk_then_round_colors_the_original_instance() {
    let sys = gen_random_regular(128, 128, 8, 3).unwrap();
    let inst = canonicalize(&sys);
    let outcome = run_walk(&inst, &WalkConfig { seed: 3, ..Default::default() }).unwrap();
    assert!(outcome.status.is_healthy(), "{}", outcome.status);
    assert_eq!(outcome.summary.violations.total(), 0, "{:?}", outcome.summary.violations);

    let rounded = round_full(&outcome.coloring, &inst, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert!(rounded.coloring.is_full());
    let x = inst.restrict(&rounded.coloring);
    assert_eq!(x.len(), 128);
    // Restricting to the original rows can only lower the maximum.
    assert!(discrepancy(&sys, &x).unwrap() <= rounded.disc);
    // The fractional part respects the barrier; rounding adds the
    // snapping error plus the finisher's contribution.
    let finisher = rounded.added_error.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    assert!(rounded.disc <= outcome.summary.b_final + 1.0 + finisher + 1e-9);
}

#[test]
fn sdp_sampler_run_is_healthy() {
    let sys = gen_random_regular(64, 64, 4, 8).unwrap();
    let inst = canonicalize(&sys);
    let cfg = WalkConfig { sampler: SamplerMode::Sdp, seed: 8, ..Default::default() };
    let outcome = run_walk(&inst, &cfg).unwrap();
    assert!(outcome.status.is_healthy(), "{}", outcome.status);
    assert_eq!(outcome.summary.violations.total(), 0, "{:?}", outcome.summary.violations);
    assert!(outcome.summary.max_step_norm_error <= 1e-10);
}

#[test]
fn simple_mode_keeps_its_barrier() {
    let sys = gen_random_regular(96, 96, 6, 1).unwrap();
    let inst = canonicalize(&sys);
    let cfg = WalkConfig { potential: PotentialMode::Simple, seed: 1, ..Default::default() };
    let outcome = run_walk(&inst, &cfg).unwrap();
    assert!(outcome.status.is_healthy(), "{}", outcome.status);
    assert!(outcome.summary.max_row_value < outcome.summary.b_final);
}

#[test]
fn runs_are_reproducible() {
    let sys = gen_random_regular(64, 64, 4, 2).unwrap();
    let inst = canonicalize(&sys);
    let cfg = WalkConfig { seed: 11, ..Default::default() };
    let a = run_walk(&inst, &cfg).unwrap();
    let b = run_walk(&inst, &cfg).unwrap();
    assert_eq!(a.coloring, b.coloring);
    assert_eq!(a.telemetry, b.telemetry);
}

#[test]
fn file_formats_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_random_regular_with(30, 25, 4, 5, SignModel::Random).unwrap();
    let path = dir.path().join("inst.di");
    std::fs::write(&path, write_instance(&sys)).unwrap();
    let back = parse_instance(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, sys);

    let x = gram_schmidt_walk(&sys, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut buf = Vec::new();
    write_coloring(&mut buf, &x).unwrap();
    assert_eq!(parse_coloring(std::str::from_utf8(&buf).unwrap()).unwrap(), x);
}

#[test]
fn all_ones_three_against_the_oracle() {
    // Enumerating the 8 colorings by hand: any mix of signs gives |sum| = 1.
    let sys = all_ones(3);
    assert_eq!(brute_force_min_disc(&sys).unwrap(), 1);
    let bf = discrepancy(&sys, &beck_fiala(&sys).unwrap()).unwrap();
    assert!((1.0..=5.0).contains(&bf));
    let gsw = discrepancy(&sys, &gram_schmidt_walk(&sys, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()).unwrap();
    assert!(gsw >= 1.0);
}

#[test]
fn every_algorithm_sits_above_the_optimum() {
    for seed in 0..6 {
        let sys = gen_random_regular_with(12, 12, 3, seed, SignModel::Random).unwrap();
        let opt = brute_force_min_disc(&sys).unwrap() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = canonicalize(&sys);
        let walk = run_walk(&inst, &WalkConfig { seed, ..Default::default() }).unwrap();
        let walk_x = inst.restrict(&round_full(&walk.coloring, &inst, &mut rng).unwrap().coloring);
        for x in [walk_x, beck_fiala(&sys).unwrap(), gram_schmidt_walk(&sys, &mut rng).unwrap(), random_coloring(12, &mut rng)] {
            assert!(discrepancy(&sys, &x).unwrap() >= opt);
        }
    }
}
