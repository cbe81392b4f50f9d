//! Acceptance suite. Prints one line per criterion and exits non-zero on any
//! unexpected outcome.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sesqui::exact::{oracle_total_size, point_prob_table, total_prob_table, totals_from_points};
use sesqui::family::{
    eta_distance, family_eval, find_tc, mixture, perturbation_check, survival_expansion, FamilySpec,
    PerturbConfig,
};
use sesqui::fixtures;
use sesqui::montecarlo::{simulate, wilson, Z99};
use sesqui::offspring::{check_k1, log_mgf_derivs, mgf, moments, BivariatePmf, ProcessSpec};
use sesqui::saddle::{
    asymp_total_prob, asymptotic_params, h_of_x, integral_point_prob, psi_small, theta_sum, x0,
    IntegralConfig, SaddleConfig,
};
use sesqui::survival::{first_order_survival, survival};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

fn c1_dual_oracle() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (_, spec) in fixtures::oracle_fixtures() {
        let a = totals_from_points(&point_prob_table(&spec, 100).unwrap());
        let b = oracle_total_size(&spec, 100).unwrap();
        for n in 1..=100 {
            worst = worst.max((a.q(n) - b.q(n)).abs());
        }
    }
    let t = start.elapsed();
    verdict(worst <= 1e-10 && within(t, 30), format!("max |gap| {worst:.2e}, {t:.1?}"))
}

fn c2_contour() -> Verdict {
    let start = Instant::now();
    let spec = fixtures::poisson_subcritical();
    let table = point_prob_table(&spec, 40).unwrap();
    let ic = IntegralConfig::default();
    let mut worst: f64 = 0.0;
    for n in 1..=40 {
        for m in 0..=(40 - n) {
            let v = integral_point_prob(&spec, n, m, None, &ic).unwrap();
            worst = worst.max((v.value / table.p(n, m) - 1.0).abs());
        }
    }
    let t = start.elapsed();
    verdict(worst <= 1e-6 && within(t, 60), format!("max rel err {worst:.2e}, {t:.1?}"))
}

fn c3_total_size_asymptotics() -> Verdict {
    let start = Instant::now();
    let spec = fixtures::poisson_subcritical();
    let exact = total_prob_table(&spec, 400).unwrap();
    let params = asymptotic_params(&spec, &SaddleConfig::default()).unwrap();
    let r = |n: usize| (exact.log_q(n) - asymp_total_prob(&params, n).log_value).exp();
    let (e100, e400) = ((r(100) - 1.0).abs(), (r(400) - 1.0).abs());
    let t = start.elapsed();
    verdict(
        e400 <= 0.02 && e400 <= 0.6 * e100 && within(t, 120),
        format!("|r100-1| {e100:.3e}, |r400-1| {e400:.3e}, {t:.1?}"),
    )
}

fn c4_xi_scaling() -> Verdict {
    let cfg = SaddleConfig::default();
    let mut ratios = Vec::new();
    for eps in [0.01, 0.02, 0.04, 0.08] {
        for mu in [1.0 + eps, 1.0 - eps] {
            let p = asymptotic_params(&fixtures::poisson(mu, 1.0), &cfg).unwrap();
            ratios.push(p.xi / (eps * eps));
        }
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let crit = asymptotic_params(&fixtures::poisson(1.0, 1.0), &cfg).unwrap().xi;
    verdict(
        hi / lo <= 2.0 && crit <= 1e-10,
        format!("xi/eps^2 in [{lo:.4}, {hi:.4}] (max/min {:.3}), xi(0) {crit:.1e}", hi / lo),
    )
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c5_survival_closed_forms() -> Verdict {
    let b = survival(&fixtures::binomial_supercritical()).unwrap();
    let binom_gap = (b.rho_process - 8.0 / 9.0).abs();
    let p = survival(&fixtures::poisson(1.2, 1.0)).unwrap();
    let oracle = bisect(|r| 1.0 - r - (-1.2 * r).exp(), 0.1, 0.9);
    let residual = (1.0 - p.rho_single - (-1.2 * p.rho_single).exp()).abs();
    let mut subcritical_zero = true;
    for spec in [
        fixtures::degenerate(),
        fixtures::geometric(),
        fixtures::parity(),
        fixtures::poisson_subcritical(),
        fixtures::poisson(1.0, 1.0),
    ] {
        let s = survival(&spec).unwrap();
        subcritical_zero &= s.rho_single == 0.0 && s.rho_process == 0.0;
    }
    verdict(
        binom_gap <= 1e-12 && residual <= 1e-12 && (p.rho_single - oracle).abs() <= 1e-10 && subcritical_zero,
        format!(
            "binomial gap {binom_gap:.1e}, poisson rho {:.7} residual {residual:.1e}, subcritical zero {subcritical_zero}",
            p.rho_single
        ),
    )
}

fn c6_first_order() -> Verdict {
    let spec = family_eval(&fixtures::binomial_family(), 1.01).unwrap();
    let rho = survival(&spec).unwrap().rho_single;
    let first = first_order_survival(&spec.offspring).unwrap();
    let ratio = rho / first;
    verdict((ratio - 1.0).abs() <= 0.05, format!("rho/first-order {ratio:.5}"))
}

fn c7_expansion() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, fam) in [("binomial", fixtures::binomial_family()), ("poisson", fixtures::poisson_family())] {
        let e = survival_expansion(&fam, 4).unwrap();
        let rel = (e.coeffs[0] / e.chain_rule_a1 - 1.0).abs();
        ok &= e.coeffs[0] > 0.0 && rel <= 0.01 && e.residual <= 1e-6;
        parts.push(format!("{name}: a1 {:.6} vs {:.6}, residual {:.1e}", e.coeffs[0], e.chain_rule_a1, e.residual));
    }
    verdict(ok, parts.join("; "))
}

fn band(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

fn c8_perturbation() -> Verdict {
    let family: FamilySpec = fixtures::poisson_family();
    let tc = find_tc(&family).unwrap();
    let partner = fixtures::poisson(1.5, 1.0);
    let pc = PerturbConfig::default();
    let mut xi_ratios = Vec::new();
    let mut rho_ratios = Vec::new();
    let mut eta_ok = true;
    for dt in [0.02, 0.03, 0.04, 0.05, 0.06] {
        let t = tc + dt;
        let base = family_eval(&family, t).unwrap();
        let lambda = eta_distance(&base, &partner, pc.r, pc.samples).unwrap();
        for f in [0.04, 0.08, 0.12, 0.16, 0.2] {
            let eta = f * dt;
            let perturbed = mixture(&base, &partner, eta / lambda).unwrap();
            let r = perturbation_check(&family, t, &perturbed, &pc).unwrap();
            eta_ok &= (r.eta / eta - 1.0).abs() <= 1e-6 && r.eta <= 0.2 * dt * (1.0 + 1e-6);
            xi_ratios.push(r.xi_gap / r.bound_xi);
            rho_ratios.push(r.rho_gap / r.eta);
        }
    }
    let (bx, br) = (band(&xi_ratios), band(&rho_ratios));
    verdict(
        bx <= 4.0 && br <= 4.0 && eta_ok,
        format!("xi_gap/bound band {bx:.3}, rho_gap/eta band {br:.3}, eta on target {eta_ok}"),
    )
}

fn c9_monte_carlo() -> Verdict {
    let start = Instant::now();
    let samples = 1_000_000u64;
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, spec) in fixtures::oracle_fixtures() {
        let exact = total_prob_table(&spec, 20).unwrap();
        let hist = simulate(&spec, samples, 20, 2024).unwrap();
        let covered = (1..=20)
            .filter(|&n| {
                let (lo, hi) = wilson(hist.counts[n], samples, Z99);
                lo <= exact.q(n) && exact.q(n) <= hi
            })
            .count();
        ok &= covered >= 19;
        parts.push(format!("{name} {covered}/20"));
    }
    let spec = fixtures::poisson_subcritical();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| simulate(&spec, 200_000, 20, 77).unwrap());
    let b = many.install(|| simulate(&spec, 200_000, 20, 77).unwrap());
    let t = start.elapsed();
    ok &= a == b && within(t, 180);
    verdict(ok, format!("{}, deterministic {}, {t:.1?}", parts.join(", "), a == b))
}

/// The stated margin `2a^{-1/2}e^{-π²/a}` is smaller than the exact error
/// `2√(π/a)e^{-π²/a}|cos 2πy| + …` at `y ∈ {0, ½}`, so the literal check is
/// expected to fail for a correct `S₀`.
fn c10_theta_sums() -> Verdict {
    let mut literal_ok = true;
    let mut corrected_ok = true;
    let mut worst = (0.0, 0.0, 0.0);
    for a in [0.1, 0.25, 0.5, 1.0] {
        for y in [0.0, 0.3, 0.5] {
            let err = (theta_sum(a, y, 0).unwrap().value - (PI / a).sqrt()).abs();
            let stated = 2.0 / a.sqrt() * (-PI * PI / a).exp();
            let exact_lead = 2.0 * (PI / a).sqrt() * (-PI * PI / a).exp();
            literal_ok &= err <= stated;
            corrected_ok &= err <= exact_lead * 1.001 + 1e-14 * (PI / a).sqrt();
            if stated > 1e-12 && err / stated > worst.2 {
                worst = (a, y, err / stated);
            }
        }
    }
    let odd = [0.1, 0.25, 0.5, 1.0]
        .iter()
        .map(|&a| theta_sum(a, 0.0, 1).unwrap().value.abs())
        .fold(0.0, f64::max);
    verdict(
        literal_ok && odd <= 1e-14,
        format!(
            "error/stated margin {:.3} at a={}, y={}; within exact leading term {corrected_ok}; |S1(a,0)| {odd:.1e}",
            worst.2, worst.0, worst.1
        ),
    )
}

fn phi_direct(pmf: &BivariatePmf, a: f64, b: f64) -> f64 {
    pmf.entries()
        .map(|(k, l, p)| p * (a * k as f64 + b * l as f64).exp())
        .sum::<f64>()
        .ln()
}

fn c11_structure() -> Verdict {
    let cfg = SaddleConfig::default();
    let r = cfg.box_radius;
    let k_fixtures: Vec<(&str, ProcessSpec)> = vec![
        ("poisson", fixtures::poisson_subcritical()),
        ("poisson_critical", fixtures::poisson(1.0, 1.0)),
        ("binomial_t1", family_eval(&fixtures::binomial_family(), 1.0).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pd = true;
    let mut modulus = true;
    let mut fd_worst: f64 = 0.0;
    let mut psi0: f64 = 0.0;
    for (_, spec) in &k_fixtures {
        let off = &spec.offspring;
        let strict = check_k1(off, &cfg.class).passes;
        for _ in 0..100 {
            let (a, b) = (rng.gen_range(-r..=r), rng.gen_range(-r..=r));
            let d = log_mgf_derivs(off, a, b);
            pd &= d.min_eigenvalue() > 0.0 && (d.hess[0][1] - d.hess[1][0]).abs() == 0.0;

            let h = 1e-4;
            let g0 = (phi_direct(off, a + h, b) - phi_direct(off, a - h, b)) / (2.0 * h);
            let g1 = (phi_direct(off, a, b + h) - phi_direct(off, a, b - h)) / (2.0 * h);
            let gnorm = d.grad[0].abs().max(d.grad[1].abs());
            fd_worst = fd_worst.max((g0 - d.grad[0]).abs().max((g1 - d.grad[1]).abs()) / gnorm);
            let h = 1e-3;
            let f = |x: f64, y: f64| phi_direct(off, a + x, b + y);
            let h00 = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
            let h11 = (f(0.0, h) - 2.0 * f(0.0, 0.0) + f(0.0, -h)) / (h * h);
            let h01 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            let hnorm = d.hess[0][0].abs().max(d.hess[1][1].abs()).max(d.hess[0][1].abs());
            let herr = (h00 - d.hess[0][0]).abs().max((h11 - d.hess[1][1]).abs()).max((h01 - d.hess[0][1]).abs());
            fd_worst = fd_worst.max(herr / hnorm);
        }
        for &(a, b) in &[(0.0, 0.0), (0.4 * r, -0.7 * r), (-0.9 * r, 0.2 * r)] {
            let top = mgf(off, Complex64::new(a, 0.0), Complex64::new(b, 0.0)).re;
            for i in 0..64 {
                for j in 0..64 {
                    let (u, v) = (2.0 * PI * i as f64 / 64.0, 2.0 * PI * j as f64 / 64.0);
                    let val = mgf(off, Complex64::new(a, u), Complex64::new(b, v)).norm();
                    let origin = i == 0 && j == 0;
                    modulus &= val <= top * (1.0 + 1e-14);
                    if strict && !origin {
                        modulus &= val < top;
                    }
                }
            }
        }
        psi0 = psi0.max(psi_small(off, 0.0, 0.0).abs());
    }
    let crit = &fixtures::poisson(1.0, 1.0).offspring;
    let h = h_of_x(crit, x0(crit), &cfg).unwrap();
    let h_origin = h.alpha.abs().max(h.beta.abs());
    let binom_crit = &family_eval(&fixtures::binomial_family(), 1.0).unwrap().offspring;
    let hb = h_of_x(binom_crit, x0(binom_crit), &cfg).unwrap();
    let h_origin = h_origin.max(hb.alpha.abs()).max(hb.beta.abs());
    let mean_ok = (moments(binom_crit).mean_y - 1.0).abs() <= 1e-15;
    verdict(
        pd && modulus && psi0 <= 1e-14 && h_origin <= 1e-10 && fd_worst <= 1e-6 && mean_ok,
        format!(
            "hessian pd {pd}, modulus {modulus}, |psi(0,0)| {psi0:.1e}, |h(x0)| {h_origin:.1e}, fd rel {fd_worst:.1e}"
        ),
    )
}

/// Criteria whose literal statement cannot hold for a correct implementation.
const EXPECTED_FAIL: &[usize] = &[10];

fn main() {
    let criteria: Vec<(usize, &str, fn() -> Verdict)> = vec![
        (1, "dual-oracle equivalence", c1_dual_oracle),
        (2, "contour-integral equivalence", c2_contour),
        (3, "total-size asymptotics", c3_total_size_asymptotics),
        (4, "xi scaling", c4_xi_scaling),
        (5, "survival closed forms", c5_survival_closed_forms),
        (6, "first-order survival", c6_first_order),
        (7, "survival expansion", c7_expansion),
        (8, "perturbation bounds", c8_perturbation),
        (9, "Monte Carlo agreement", c9_monte_carlo),
        (10, "theta-sum bound", c10_theta_sums),
        (11, "structural invariants", c11_structure),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let expected_fail = EXPECTED_FAIL.contains(&id);
        let label = match (v.passed, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if v.passed == expected_fail {
            unexpected += 1;
        }
        println!("criterion {id:>2} {label:<17} {name}: {} [{:.1?}]", v.detail, start.elapsed());
    }
    if unexpected > 0 {
        println!("{unexpected} criterion outcome(s) differ from expectation");
        std::process::exit(1);
    }
}
