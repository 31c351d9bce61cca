use homopolymer::field::{canonical_points, critical_eigenfunction, eigenfunction, orbit_size, stationary_measure};
use homopolymer::kernel::{h_transition_density, h_transition_row, solve_pinned_diag};
use homopolymer::lattice::{LatticePoint, TimeGrid};
use homopolymer::spectral::{critical_beta, i_lambda};

fn pt(v: &[i64]) -> LatticePoint {
    LatticePoint::new(v.to_vec()).unwrap()
}

/// `sum_y r(s, 0, y)` over `|y|_inf <= radius`, one representative per orbit.
fn row_sum_from_origin(beta: f64, d: usize, s: f64, radius: u32, box_radius: i64, supercritical: bool) -> f64 {
    let pair = if supercritical {
        eigenfunction(beta, d, box_radius).unwrap()
    } else {
        critical_eigenfunction(d, box_radius).unwrap()
    };
    let grid = TimeGrid::new(s, 0.005).unwrap();
    let kernel = solve_pinned_diag(beta, &grid, d).unwrap();
    let reps = canonical_points(d, radius);
    let ys: Vec<LatticePoint> = reps
        .iter()
        .map(|r| LatticePoint::new(r.iter().map(|&c| c as i64).collect()).unwrap())
        .collect();
    let row = h_transition_row(&kernel, s, &LatticePoint::origin(d), &ys, &pair).unwrap();
    reps.iter().zip(row).map(|(r, v)| orbit_size(r) * v).sum()
}

#[test]
fn critical_rows_are_probability_vectors() {
    let beta5 = critical_beta(5).unwrap().beta_c;
    let sum = row_sum_from_origin(beta5, 5, 1.0, 15, 4, false);
    assert!((sum - 1.0).abs() < 1e-3, "{sum}");
}

#[test]
fn supercritical_rows_include_the_eigenvalue_factor() {
    let beta = 1.2 * critical_beta(3).unwrap().beta_c;
    let sum = row_sum_from_origin(beta, 3, 1.0, 15, 6, true);
    assert!((sum - 1.0).abs() < 1e-3, "{sum}");
}

#[test]
fn chain_is_reversible_for_the_stationary_law() {
    let beta5 = critical_beta(5).unwrap().beta_c;
    let pair = critical_eigenfunction(5, 4).unwrap();
    let pi = stationary_measure(&pair).unwrap();
    let grid = TimeGrid::new(2.0, 0.01).unwrap();
    let kernel = solve_pinned_diag(beta5, &grid, 5).unwrap();
    let sites = [pt(&[0, 0, 0, 0, 0]), pt(&[1, 0, 0, 0, 0]), pt(&[1, -1, 0, 2, 0]), pt(&[0, 0, 3, 0, 1])];
    for x in &sites {
        for y in &sites {
            let a = pi.probability(x).unwrap() * h_transition_density(&kernel, 2.0, x, y, &pair).unwrap();
            let b = pi.probability(y).unwrap() * h_transition_density(&kernel, 2.0, y, x, &pair).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-300), "{x:?} {y:?} {a} {b}");
        }
    }
}

#[test]
fn transition_density_starts_at_the_identity() {
    let beta5 = critical_beta(5).unwrap().beta_c;
    let pair = critical_eigenfunction(5, 2).unwrap();
    let grid = TimeGrid::new(0.01, 0.001).unwrap();
    let kernel = solve_pinned_diag(beta5, &grid, 5).unwrap();
    let x = pt(&[1, 1, 0, 0, 0]);
    let stay = h_transition_density(&kernel, 0.01, &x, &x, &pair).unwrap();
    // The holding rate off the origin is 2d = 10.
    assert!((stay - (-0.1f64).exp()).abs() < 5e-3, "{stay}");
}

#[test]
fn subcritical_partition_function_converges() {
    // Z_{beta,infinity}(0) = 1 / (1 - beta I(0)) below beta_d.
    let d = 3;
    let beta = 0.5 * critical_beta(d).unwrap().beta_c;
    let grid = TimeGrid::new(200.0, 0.01).unwrap();
    let z = solve_pinned_diag(beta, &grid, d).unwrap().partition_curve();
    let limit = 1.0 / (1.0 - beta * i_lambda(0.0, d).unwrap());
    let mut prev = 0.0;
    for &v in &z.z_values {
        assert!(v >= prev && v < limit);
        prev = v;
    }
    assert!((z.last() / limit - 1.0).abs() < 0.02, "{} vs {limit}", z.last());
}
