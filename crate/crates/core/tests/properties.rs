use num_complex::Complex64;
use proptest::prelude::*;

use sesqui::exact::{oracle_total_size, point_prob_table, total_prob_table, totals_from_points};
use sesqui::family::{eta_distance, mixture};
use sesqui::montecarlo::{estimate_point_probs, wilson, Z95};
use sesqui::offspring::{check_k1, log_mgf_derivs, mgf, moments, pgf, BivariatePmf, ClassParams, ProcessSpec};
use sesqui::saddle::{solve_saddle, SaddleConfig};
use sesqui::survival::survival;

fn pmf_strategy(max_k: usize, max_l: usize) -> impl Strategy<Value = BivariatePmf> {
    prop::collection::vec(0.0f64..1.0, (max_k + 1) * (max_l + 1)).prop_filter_map("positive mass", move |w| {
        let total: f64 = w.iter().sum();
        if total < 1e-3 {
            return None;
        }
        let entries: Vec<(usize, usize, f64)> = w
            .iter()
            .enumerate()
            .map(|(i, &v)| (i / (max_l + 1), i % (max_l + 1), v / total))
            .collect();
        BivariatePmf::from_entries(&entries, true).ok()
    })
}

fn spec_strategy() -> impl Strategy<Value = ProcessSpec> {
    (pmf_strategy(3, 2), pmf_strategy(2, 1)).prop_map(|(o, i)| ProcessSpec::new(o, i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pgf_at_one_is_mass(p in pmf_strategy(4, 3)) {
        let v = pgf(&p, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        prop_assert!((v.re - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mgf_modulus_bounded(p in pmf_strategy(3, 3), a in -1.0f64..1.0, b in -1.0f64..1.0,
                           u in -7.0f64..7.0, v in -7.0f64..7.0) {
        let top = mgf(&p, Complex64::new(a, 0.0), Complex64::new(b, 0.0)).re;
        let val = mgf(&p, Complex64::new(a, u), Complex64::new(b, v)).norm();
        prop_assert!(val <= top * (1.0 + 1e-12));
    }

    #[test]
    fn hessian_positive_definite_for_k1(p in pmf_strategy(3, 3), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let d = log_mgf_derivs(&p, a, b);
        prop_assert_eq!(d.hess[0][1], d.hess[1][0]);
        if check_k1(&p, &ClassParams::default()).passes {
            prop_assert!(d.min_eigenvalue() > 0.0);
        }
    }

    #[test]
    fn exact_routes_agree(spec in spec_strategy()) {
        let points = point_prob_table(&spec, 30).unwrap();
        let a = totals_from_points(&points);
        let b = oracle_total_size(&spec, 30).unwrap();
        let c = total_prob_table(&spec, 30).unwrap();
        for n in 1..=30 {
            prop_assert!((a.q(n) - b.q(n)).abs() <= 1e-10, "n={} {} {}", n, a.q(n), b.q(n));
            prop_assert!((a.q(n) - c.q(n)).abs() <= 1e-14);
        }
        let total: f64 = (1..=30).map(|n| a.q(n)).sum();
        prop_assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn survival_is_a_probability(spec in spec_strategy()) {
        let s = survival(&spec).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.rho_single));
        prop_assert!((0.0..=1.0).contains(&s.rho_process));
        prop_assert!(s.rho_process <= 1.0);
        if moments(&spec.offspring).mean_y <= 1.0 {
            prop_assert_eq!(s.rho_single, 0.0);
        } else {
            prop_assert!(s.residual <= 1e-10);
        }
    }

    #[test]
    fn mixture_is_linear(a in spec_strategy(), b in spec_strategy(), u in 0.0f64..1.0) {
        let m = mixture(&a, &b, u).unwrap();
        let expect = (1.0 - u) * moments(&a.offspring).mean_y + u * moments(&b.offspring).mean_y;
        prop_assert!((moments(&m.offspring).mean_y - expect).abs() <= 1e-12);
        let full = eta_distance(&a, &b, 1.5, 8).unwrap();
        let part = eta_distance(&a, &m, 1.5, 8).unwrap();
        prop_assert!(part <= u * full * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn saddle_reproduces_target(mu in 0.8f64..1.2, nu in 0.5f64..1.5, r in 0.6f64..1.6) {
        prop_assume!((r / nu).ln().abs() <= 0.9);
        let p = BivariatePmf::product_poisson(mu, nu, 1e-15).unwrap();
        let s = solve_saddle(&p, [1.0, r], &SaddleConfig::default()).unwrap();
        let d = log_mgf_derivs(&p, s.alpha, s.beta);
        prop_assert!((d.grad[0] - 1.0).abs() <= 1e-10 && (d.grad[1] - r).abs() <= 1e-10);
        prop_assert!(d.det() > 0.0);
    }

    #[test]
    fn wilson_contains_estimate(n in 1u64..10_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson(k, n, Z95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_partitions_samples(spec in spec_strategy(), seed in any::<u64>()) {
        let (rows, hist) = estimate_point_probs(&spec, 3000, 15, seed).unwrap();
        let counted: u64 = rows.iter().map(|r| r.count).sum();
        prop_assert_eq!(counted + hist.exceeded, 3000);
        let again = estimate_point_probs(&spec, 3000, 15, seed).unwrap();
        prop_assert_eq!(rows, again.0);
    }
}
