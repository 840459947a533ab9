use gdprox::presets::single_atom;
use gdprox::{
    gap_probability_binomial, gap_probability_exact, gd_run_empirical, gd_run_population,
    hinge_distribution, hinge_objective, proximity_experiment, sample, trajectory_distance,
    GdConfig,
};

#[test]
fn proximity_is_deterministic_across_thread_counts() {
    let cfg = GdConfig::new(1.0 / 8.0, 64);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                proximity_experiment(
                    &hinge_objective(),
                    &hinge_distribution(),
                    &cfg,
                    64,
                    40,
                    3,
                    0.1,
                )
                .unwrap()
            })
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert!(a.highprob_holds());
}

#[test]
fn single_atom_sample_tracks_population() {
    let (obj, dist) = single_atom();
    let cfg = GdConfig::new(0.3, 25);
    let s = sample(&dist, 17, 1, 0).unwrap();
    let a = gd_run_empirical(&obj, &s, &cfg).unwrap();
    let b = gd_run_population(&obj, &dist, &cfg).unwrap();
    assert!(trajectory_distance(&a, &b)
        .unwrap()
        .iter()
        .all(|&d| d == 0.0));
}

#[test]
fn exact_and_log_space_gap_probabilities_agree() {
    for n in 1..=40 {
        let e = gap_probability_exact(n).unwrap();
        let b = gap_probability_binomial(n);
        assert!((e - b).abs() < 1e-12, "n={n}: {e} vs {b}");
    }
    assert!(gap_probability_exact(41).is_err());
}

#[test]
fn measure_merges_duplicates() {
    let dist = hinge_distribution();
    let s = sample(&dist, 200, 5, 2).unwrap();
    let m = s.measure();
    assert!(m.atoms.len() <= dist.atoms().len());
    assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
