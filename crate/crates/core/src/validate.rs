//! Invariant checks run by the `validate` command.

use num_complex::Complex64;
use serde::Serialize;

use crate::exact::{oracle_total_size, point_prob_table, total_prob_table};
use crate::montecarlo::estimate_point_probs;
use crate::offspring::{check_k1, log_mgf_derivs, mgf, moments, ProcessSpec};
use crate::saddle::{
    asymptotic_params, capital_psi, check_class, integral_point_prob, psi_small, solve_saddle,
    IntegralConfig, SaddleConfig,
};
use crate::survival::survival;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub fixture: String,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Recorder<'a> {
    fixture: &'a str,
    checks: Vec<Check>,
}

impl Recorder<'_> {
    fn record(&mut self, invariant: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            fixture: self.fixture.to_string(),
            invariant,
            passed,
            detail,
        });
    }
}

const NMAX: usize = 60;

/// Runs every applicable invariant on one process.
pub fn validate_spec(name: &str, spec: &ProcessSpec) -> Vec<Check> {
    let mut rec = Recorder {
        fixture: name,
        checks: Vec::new(),
    };
    let cfg = SaddleConfig::default();
    for (label, pmf) in [("offspring", &spec.offspring), ("initial", &spec.initial)] {
        let mass = pmf.total_mass();
        let ok = mass <= 1.0 + 1e-12 && mass >= 1.0 - pmf.tail_mass_bound() - 1e-12;
        rec.record("pmf_mass", ok, format!("{label} mass {mass}"));
    }

    match (total_prob_table(spec, NMAX), oracle_total_size(spec, NMAX)) {
        (Ok(a), Ok(b)) => {
            let gap = (1..=NMAX).map(|n| (a.q(n) - b.q(n)).abs()).fold(0.0, f64::max);
            rec.record("dual_oracle", gap <= 1e-10, format!("max gap {gap:e}"));
        }
        (Err(e), _) | (_, Err(e)) => rec.record("dual_oracle", false, e.to_string()),
    }

    match survival(spec) {
        Ok(s) => {
            let in_range = (0.0..=1.0).contains(&s.rho_single) && (0.0..=1.0).contains(&s.rho_process);
            rec.record("survival_range", in_range, format!("rho {}", s.rho_process));
            if moments(&spec.offspring).mean_y <= 1.0 {
                rec.record("subcritical_dies", s.rho_process == 0.0, format!("rho {}", s.rho_process));
            }
        }
        Err(e) => rec.record("survival_range", false, e.to_string()),
    }

    match estimate_point_probs(spec, 2000, 20, 1) {
        Ok((rows, hist)) => {
            let counted: u64 = rows.iter().map(|r| r.count).sum();
            rec.record(
                "mc_partition",
                counted + hist.exceeded == hist.samples,
                format!("{counted} + {} of {}", hist.exceeded, hist.samples),
            );
        }
        Err(e) => rec.record("mc_partition", false, e.to_string()),
    }

    if check_class(spec, &cfg).is_err() {
        return rec.checks;
    }
    let off = &spec.offspring;
    let r = cfg.box_radius;

    let mut worst = f64::INFINITY;
    for i in 0..10 {
        for j in 0..10 {
            let a = -r + 2.0 * r * (i as f64 + 0.5) / 10.0;
            let b = -r + 2.0 * r * (j as f64 + 0.5) / 10.0;
            worst = worst.min(log_mgf_derivs(off, a, b).min_eigenvalue());
        }
    }
    rec.record("hessian_pd", worst > 0.0, format!("min eigenvalue {worst:e}"));

    let strict = check_k1(off, &cfg.class).passes;
    let mut modulus_ok = true;
    for &(a, b) in &[(0.0, 0.0), (0.5 * r, -0.5 * r), (-0.8 * r, 0.3 * r)] {
        let top = mgf(off, Complex64::new(a, 0.0), Complex64::new(b, 0.0)).re;
        for i in 0..64 {
            for j in 0..64 {
                if i == 0 && j == 0 {
                    continue;
                }
                let u = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                let v = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
                let val = mgf(off, Complex64::new(a, u), Complex64::new(b, v)).norm();
                if val > top * (1.0 + 1e-14) || (strict && val >= top) {
                    modulus_ok = false;
                }
            }
        }
    }
    rec.record("mgf_modulus", modulus_ok, format!("strict={strict}"));

    let psi0 = psi_small(off, 0.0, 0.0);
    rec.record("psi_origin", psi0.abs() <= 1e-14, format!("psi(0,0) = {psi0:e}"));

    let m = moments(off);
    match solve_saddle(off, [1.0, m.mean_z.max(1e-3)], &cfg) {
        Ok(s) => {
            let d = log_mgf_derivs(off, s.alpha, s.beta);
            let gap = (d.grad[0] - 1.0).abs().max((d.grad[1] - m.mean_z.max(1e-3)).abs());
            rec.record("saddle_residual", gap <= 1e-10 && d.det() > 0.0, format!("residual {gap:e}"));
        }
        Err(e) => rec.record("saddle_residual", false, e.to_string()),
    }

    match asymptotic_params(spec, &cfg) {
        Ok(p) => {
            rec.record("xi_nonnegative", p.xi >= 0.0 && p.theta > 0.0 && p.psi_pp < 0.0, format!("xi {}", p.xi));
            let top = -p.xi;
            let mut ok = true;
            for i in 0..=30 {
                let x = p.x0 - 0.15 + 0.01 * i as f64;
                if let Ok(v) = capital_psi(off, x, &cfg) {
                    ok &= v <= top + 1e-12;
                }
            }
            rec.record("xhat_maximises", ok, format!("xhat {}", p.xhat));
        }
        Err(e) => rec.record("xi_nonnegative", false, e.to_string()),
    }

    match point_prob_table(spec, 20) {
        Ok(table) => {
            let ic = IntegralConfig::default();
            let mut worst: f64 = 0.0;
            let mut failure = None;
            for n in 1..=20 {
                for mm in 0..=(20 - n) {
                    match integral_point_prob(spec, n, mm, None, &ic) {
                        Ok(v) => {
                            let exact = table.p(n, mm);
                            if exact > 1e-200 {
                                worst = worst.max((v.value / exact - 1.0).abs());
                            }
                        }
                        Err(e) => failure = Some(e.to_string()),
                    }
                }
            }
            match failure {
                Some(e) => rec.record("integral_vs_exact", false, e),
                None => rec.record("integral_vs_exact", worst <= 1e-6, format!("max rel {worst:e}")),
            }
        }
        Err(e) => rec.record("integral_vs_exact", false, e.to_string()),
    }
    rec.checks
}
