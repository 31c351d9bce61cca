use homopolymer::kernel::solve_pinned_diag;
use homopolymer::lattice::TimeGrid;
use homopolymer::montecarlo::{
    estimate_escape_probability, sample_free_paths, sample_gibbs_paths, sigma_distribution, simulate_h_chain,
};
use homopolymer::spectral::{critical_beta, i_lambda};
use homopolymer::field::critical_eigenfunction;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn volterra_z(beta: f64, t: f64, d: usize) -> f64 {
    let grid = TimeGrid::new(t, 0.01).unwrap();
    solve_pinned_diag(beta, &grid, d).unwrap().partition_curve().last()
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let beta3 = critical_beta(3).unwrap().beta_c;
    let run = || {
        (
            sample_free_paths(30.0, 3000, beta3, 3, 9).unwrap(),
            sample_gibbs_paths(30.0, 3000, beta3, 3, 9, 0.05).unwrap(),
            estimate_escape_probability(4, 200.0, 3000, 9).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let three = in_pool(3, run);
    assert_eq!(one, three);
    assert_eq!(one, in_pool(1, run));

    let pair = critical_eigenfunction(5, 3).unwrap();
    let a = simulate_h_chain(&pair, 500.0, 2).unwrap();
    let b = in_pool(3, || simulate_h_chain(&pair, 500.0, 2).unwrap());
    assert_eq!(a, b);
}

#[test]
fn free_paths_satisfy_the_sample_invariants() {
    let t = 25.0;
    let e = sample_free_paths(t, 4000, 2.5, 3, 1).unwrap();
    assert_eq!(e.len(), 4000);
    assert!(e.ess <= e.len() as f64 + 1e-9);
    for s in &e.samples {
        assert!(s.local_time > 0.0 && s.local_time <= t);
        assert!(s.last_visit >= s.local_time && s.last_visit <= t);
        assert!(s.weight >= 1.0);
        assert_eq!(s.weight, (2.5 * s.local_time).exp());
    }
}

#[test]
fn gibbs_weights_estimate_the_partition_function() {
    let beta3 = critical_beta(3).unwrap().beta_c;
    let e = sample_gibbs_paths(100.0, 100_000, beta3, 3, 1, 0.02).unwrap();
    let (z, se) = e.partition_estimate();
    let exact = volterra_z(beta3, 100.0, 3);
    assert!((z - exact).abs() < 3.0 * se, "{z} +- {se} vs {exact}");
}

#[test]
fn one_sigma_intervals_cover_two_thirds_of_the_time() {
    let beta3 = critical_beta(3).unwrap().beta_c;
    let exact = volterra_z(beta3, 100.0, 3);
    let mut covered = 0;
    let mut z_sum = 0.0;
    for seed in 0..50 {
        let e = sample_gibbs_paths(100.0, 20_000, beta3, 3, 1000 + seed, 0.05).unwrap();
        let (z, se) = e.partition_estimate();
        let score = (z - exact) / se;
        covered += (score.abs() <= 1.0) as usize;
        z_sum += score;
    }
    let frac = covered as f64 / 50.0;
    // Binomial(50, 0.683) has standard deviation 0.066.
    assert!((frac - 0.683).abs() < 0.2, "coverage {frac}");
    // The mean of 50 standard scores has standard deviation 0.14.
    assert!((z_sum / 50.0).abs() < 0.45, "mean score {}", z_sum / 50.0);
}

#[test]
fn free_walk_leaves_the_origin_early() {
    let e = sample_free_paths(1e3, 20_000, 0.0, 3, 5).unwrap();
    assert_eq!(e.ess, 20_000.0);
    let report = sigma_distribution(&e).unwrap();
    assert!(report.mean < 0.1, "{}", report.mean);
}

#[test]
fn mean_free_local_time_approaches_the_green_function() {
    // E L_t = int_0^t p_0(s, 0, 0) ds; the remainder beyond t = 10^3 is
    // about 2 (4 pi)^{-3/2} t^{-1/2} < 1.5e-3.
    let e = sample_free_paths(1e3, 100_000, 0.0, 3, 8).unwrap();
    let n = e.len() as f64;
    let mean = e.samples.iter().map(|s| s.local_time).sum::<f64>() / n;
    let var = e.samples.iter().map(|s| (s.local_time - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let g = i_lambda(0.0, 3).unwrap();
    assert!((mean - g).abs() < 3.0 * (var / n).sqrt() + 1.5e-3, "{mean} vs {g}");
}
