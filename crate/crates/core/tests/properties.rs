use homopolymer::lattice::{free_kernel, free_kernel_diag, symbol, LatticePoint, TorusPoint};
use homopolymer::montecarlo::{effective_sample_size, mixture_cf, sample_free_paths, sigma_limit_cdf};
use homopolymer::spectral::i_lambda;
use proptest::prelude::*;
use std::f64::consts::PI;

fn point(max_dim: usize, reach: i64) -> impl Strategy<Value = LatticePoint> {
    prop::collection::vec(-reach..=reach, 1..=max_dim).prop_map(LatticePoint::from)
}

proptest! {
    #[test]
    fn symbol_lies_in_its_range(angles in prop::collection::vec(-PI..PI, 1..6)) {
        let d = angles.len();
        let zero = angles.iter().all(|&a| a == 0.0);
        let v = symbol(&TorusPoint::new(angles).unwrap(), d).unwrap();
        prop_assert!((0.0..=4.0 * d as f64).contains(&v));
        prop_assert_eq!(v == 0.0, zero);
    }

    #[test]
    fn heat_kernel_is_dominated_by_its_diagonal(x in point(4, 6), t in 0.01f64..30.0, dt in 0.01f64..5.0) {
        let d = x.dim();
        let diag = free_kernel_diag(t, d).unwrap();
        let p = free_kernel(t, &x).unwrap();
        prop_assert!(p >= 0.0 && p <= diag * (1.0 + 1e-12));
        prop_assert!(free_kernel_diag(t + dt, d).unwrap() < diag);
    }

    #[test]
    fn canonical_form_ignores_permutations_and_signs(x in point(5, 20), rot in 0usize..5, flip in any::<u8>()) {
        let mut c = x.coords().to_vec();
        let k = rot % c.len();
        c.rotate_left(k);
        for (i, v) in c.iter_mut().enumerate() {
            if flip >> (i % 8) & 1 == 1 {
                *v = -*v;
            }
        }
        let y = LatticePoint::from(c);
        prop_assert_eq!(x.canonical(), y.canonical());
        prop_assert_eq!(x.sup_norm(), y.sup_norm());
        prop_assert_eq!(x.l1_norm(), y.l1_norm());
    }

    #[test]
    fn lattice_points_round_trip_through_text(x in point(6, 1_000_000)) {
        let back: LatticePoint = x.to_string().parse().unwrap();
        prop_assert_eq!(&back, &x);
        let bracketed: LatticePoint = format!("[ {} ]", x.to_string().replace(',', ", ")).parse().unwrap();
        prop_assert_eq!(bracketed, x);
    }

    #[test]
    fn lattice_point_parser_never_panics(s in "\\PC{0,24}") {
        let _ = s.parse::<LatticePoint>();
    }

    #[test]
    fn green_function_decreases_in_lambda(d in 3usize..6, a in 0.0f64..5.0, gap in 1e-3f64..5.0) {
        let lo = i_lambda(a, d).unwrap();
        let hi = i_lambda(a + gap, d).unwrap();
        prop_assert!(hi < lo);
    }

    #[test]
    fn ess_is_bounded_and_scale_free(w in prop::collection::vec(1e-6f64..1e6, 1..200), scale in 1e-3f64..1e3) {
        let n = w.len() as f64;
        let e = effective_sample_size(w.iter().copied());
        prop_assert!(e >= 1.0 - 1e-9 && e <= n * (1.0 + 1e-12));
        let scaled = effective_sample_size(w.iter().map(|v| v * scale));
        prop_assert!((scaled / e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn limit_laws_are_distributions(u in 0.0f64..1.0, v in 0.0f64..1.0, r in 0.0f64..4.0) {
        for d in [3, 4] {
            let (a, b) = (sigma_limit_cdf(d, u.min(v)).unwrap(), sigma_limit_cdf(d, u.max(v)).unwrap());
            prop_assert!((0.0..=1.0).contains(&a) && a <= b);
            let c = mixture_cf(d, r).unwrap();
            prop_assert!(c > 0.0 && c <= 1.0 + 1e-12);
            prop_assert!(mixture_cf(d, r + 0.1).unwrap() < c);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_path_samples_respect_their_invariants(
        d in 1usize..6,
        t in 0.1f64..20.0,
        beta in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let e = sample_free_paths(t, 200, beta, d, seed).unwrap();
        prop_assert!(e.ess <= e.len() as f64 * (1.0 + 1e-12));
        for s in &e.samples {
            prop_assert_eq!(s.endpoint.dim(), d);
            prop_assert!(s.local_time > 0.0 && s.local_time <= t);
            prop_assert!(s.last_visit >= s.local_time && s.last_visit <= t);
            prop_assert!(s.weight >= 1.0);
            prop_assert_eq!(s.endpoint.is_origin() && s.last_visit < t, false);
        }
        prop_assert_eq!(&e, &sample_free_paths(t, 200, beta, d, seed).unwrap());
    }
}
