//! Survival probabilities through the root of `h_Y(x) = 1`,
//! `h_Y(x) = (1 - g_Y(1 - x)) / x`.

use crate::error::{Error, Result};
use crate::offspring::{binomial_moments_y, moments, pgf_y, BivariatePmf, ProcessSpec};

/// Below this `|x|` the quotient form of `h_Y` is replaced by its series.
const SERIES_SWITCH: f64 = 1e-6;
const SEARCH_LO: f64 = -0.3;
const SEARCH_HI: f64 = 1.0;
const SCAN_POINTS: usize = 260;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalResult {
    /// Root of `h_Y(x) = 1` nearest zero, if one was bracketed.
    pub rho_hat: Option<f64>,
    /// Any further bracketed roots.
    pub other_roots: Vec<f64>,
    /// Survival probability from one type-L ancestor.
    pub rho_single: f64,
    /// Survival probability of the whole process.
    pub rho_process: f64,
    /// `|g_Y(1 - ρ) - (1 - ρ)|` at `ρ = rho_single`.
    pub residual: f64,
}

/// `h_Y(x)`, switching to `E Y - E C(Y,2) x + E C(Y,3) x²` near zero.
pub fn h_y(offspring: &BivariatePmf, x: f64) -> f64 {
    if x.abs() < SERIES_SWITCH {
        let b = binomial_moments_y(offspring, 3);
        b[1] - b[2] * x + b[3] * x * x
    } else {
        (1.0 - pgf_y(offspring, 1.0 - x)) / x
    }
}

/// Marginal `Y` weights used by the Newton refinement.
struct Marginal {
    probs: Vec<f64>,
}

impl Marginal {
    fn new(pmf: &BivariatePmf) -> Self {
        Self {
            probs: pmf.marginal_y(),
        }
    }

    /// `g_Y(s)` and `g_Y'(s)`.
    fn eval(&self, s: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut dg = 0.0;
        for &p in self.probs.iter().rev() {
            dg = dg * s + g;
            g = g * s + p;
        }
        (g, dg)
    }
}

/// `x h_Y(x) - x = 1 - g_Y(1-x) - x`, whose non-zero roots are those of
/// `h_Y(x) = 1`.
fn refine_root(marg: &Marginal, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let f = |x: f64| {
        let (g, dg) = marg.eval(1.0 - x);
        (1.0 - g - x, dg - 1.0)
    };
    let sign_lo = f_lo.signum();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if v.signum() == sign_lo {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        let next = if dv != 0.0 && newton > lo.min(hi) && newton < lo.max(hi) {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-17 * x.abs().max(1.0) || (hi - lo).abs() < 1e-16 {
            return next;
        }
        x = next;
    }
    x
}

/// All roots of `h_Y(x) = 1` bracketed on `[-0.3, 1)`, nearest zero first.
pub fn rho_hat_roots(offspring: &BivariatePmf) -> Vec<f64> {
    let marg = Marginal::new(offspring);
    let f = |x: f64| h_y(offspring, x) - 1.0;
    let xs: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| SEARCH_LO + (SEARCH_HI - SEARCH_LO) * i as f64 / SCAN_POINTS as f64)
        .filter(|&x| x < SEARCH_HI)
        .collect();
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let v = f(x);
        if v == 0.0 {
            roots.push(x);
            prev = None;
            continue;
        }
        if let Some((px, pv)) = prev {
            if pv.signum() != v.signum() {
                // the polynomial form always vanishes at zero, so brackets
                // containing zero are refined on h_Y - 1 directly
                let root = if px < 0.0 && x > 0.0 {
                    refine_near_zero(offspring, px, x)
                } else {
                    refine_root(&marg, px, x, 1.0 - marg.eval(1.0 - px).0 - px)
                };
                roots.push(root);
            }
        }
        prev = Some((x, v));
    }
    roots.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    roots
}

/// Bisection on `h_Y - 1` itself for brackets straddling zero, where the
/// polynomial form has a spurious root.
fn refine_near_zero(offspring: &BivariatePmf, mut lo: f64, mut hi: f64) -> f64 {
    let f = |x: f64| h_y(offspring, x) - 1.0;
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Root `ρ̂` of `h_Y(x) = 1` on `[-0.3, 1)`, checked against
/// `sign(ρ̂) = sign(E Y - 1)`.
pub fn solve_rho_hat(offspring: &BivariatePmf) -> Result<f64> {
    let roots = rho_hat_roots(offspring);
    let Some(&root) = roots.first() else {
        return Err(Error::NoRoot);
    };
    let mean = moments(offspring).mean_y;
    let gap = mean - 1.0;
    let consistent = if root.abs() <= 1e-10 {
        gap.abs() <= 1e-8
    } else {
        root.signum() == gap.signum()
    };
    if !consistent {
        return Err(Error::RootSignMismatch { root, mean });
    }
    Ok(root)
}

fn fixed_point_residual(offspring: &BivariatePmf, rho: f64) -> f64 {
    (pgf_y(offspring, 1.0 - rho) - (1.0 - rho)).abs()
}

/// Single-ancestor and whole-process survival probabilities.
pub fn survival(spec: &ProcessSpec) -> Result<SurvivalResult> {
    let off = &spec.offspring;
    let mean = moments(off).mean_y;
    let mut roots = rho_hat_roots(off);
    let rho_hat = if roots.is_empty() {
        None
    } else {
        Some(roots.remove(0))
    };
    let rho_single = if mean <= 1.0 {
        0.0
    } else {
        match rho_hat {
            Some(r) if r > 0.0 => r,
            _ => return Err(Error::NoConvergence {
                op: "survival",
                iterations: SCAN_POINTS,
            }),
        }
    };
    let rho_process = 1.0 - pgf_y(&spec.initial, 1.0 - rho_single);
    Ok(SurvivalResult {
        rho_hat,
        other_roots: roots,
        rho_single,
        rho_process: rho_process.clamp(0.0, 1.0),
        residual: fixed_point_residual(off, rho_single),
    })
}

/// First-order survival estimate `2(E Y - 1) / E Y(Y-1)`.
pub fn first_order_survival(offspring: &BivariatePmf) -> Result<f64> {
    let m = moments(offspring);
    if !(m.fact2_y > 0.0) {
        return Err(Error::DegenerateSecondMoment);
    }
    Ok(2.0 * (m.mean_y - 1.0) / m.fact2_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binomial2(p: f64) -> BivariatePmf {
        let q = 1.0 - p;
        BivariatePmf::from_entries(&[(0, 0, q * q), (1, 0, 2.0 * p * q), (2, 0, p * p)], false)
            .unwrap()
    }

    fn poisson(mu: f64) -> BivariatePmf {
        BivariatePmf::product_poisson(mu, 1.0, 1e-15).unwrap()
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn h_y_examples() {
        let pp = poisson(1.3);
        assert_relative_eq!(h_y(&pp, 0.0), moments(&pp).mean_y, epsilon = 1e-15);
        let bern = BivariatePmf::from_entries(&[(0, 2, 0.3), (1, 0, 0.7)], false).unwrap();
        for x in [-0.2, 1e-8, 0.1, 0.5, 0.9] {
            assert_relative_eq!(h_y(&bern, x), 0.7, epsilon = 1e-12);
        }
        let b = binomial2(0.75);
        for x in [-0.25, -1e-7, 0.0, 3e-7, 0.2, 0.8] {
            assert_relative_eq!(h_y(&b, x), 1.5 - 0.5625 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_y_is_continuous_across_series_switch() {
        let pp = poisson(1.1);
        let below = h_y(&pp, 0.999_999e-6);
        let above = h_y(&pp, 1.000_001e-6);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn rho_hat_examples() {
        let crit = BivariatePmf::product_poisson(1.0, 1.0, 1e-15).unwrap();
        assert!(solve_rho_hat(&crit).unwrap().abs() <= 1e-10);
        assert_relative_eq!(solve_rho_hat(&binomial2(0.75)).unwrap(), 8.0 / 9.0, epsilon = 1e-14);
        let bern = BivariatePmf::from_entries(&[(0, 0, 0.1), (1, 0, 0.9)], false).unwrap();
        assert!(matches!(solve_rho_hat(&bern), Err(Error::NoRoot)));
        let sub = solve_rho_hat(&poisson(0.9)).unwrap();
        assert!(sub < 0.0);
    }

    #[test]
    fn survival_examples() {
        let b = binomial2(0.75);
        let s = survival(&ProcessSpec::new(b.clone(), BivariatePmf::atom(1, 0))).unwrap();
        assert_relative_eq!(s.rho_single, 8.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(s.rho_process, 8.0 / 9.0, epsilon = 1e-12);
        let s2 = survival(&ProcessSpec::new(b, BivariatePmf::atom(2, 0))).unwrap();
        assert_relative_eq!(s2.rho_process, 80.0 / 81.0, epsilon = 1e-12);

        let pp = poisson(1.2);
        let s = survival(&ProcessSpec::new(pp, BivariatePmf::atom(1, 0))).unwrap();
        let oracle = bisect(|r| 1.0 - r - (-1.2 * r).exp(), 0.1, 0.9);
        assert!(s.residual <= 1e-12);
        assert!((s.rho_single - oracle).abs() <= 1e-10);
        assert!((s.rho_single - 0.313698).abs() < 1e-6);
    }

    #[test]
    fn subcritical_and_critical_are_exactly_zero() {
        for mu in [0.5, 0.95, 1.0] {
            let s = survival(&ProcessSpec::new(poisson(mu), BivariatePmf::atom(1, 0))).unwrap();
            assert_eq!(s.rho_single, 0.0);
            assert_eq!(s.rho_process, 0.0);
        }
        let bern = BivariatePmf::from_entries(&[(0, 0, 0.1), (1, 0, 0.9)], false).unwrap();
        let s = survival(&ProcessSpec::new(bern, BivariatePmf::atom(1, 0))).unwrap();
        assert_eq!(s.rho_single, 0.0);
        assert!(s.rho_hat.is_none());
    }

    #[test]
    fn first_order_examples() {
        let crit = binomial2(0.5);
        assert_eq!(first_order_survival(&crit).unwrap(), 0.0);
        let b = binomial2(0.55);
        assert_relative_eq!(first_order_survival(&b).unwrap(), 0.2 / 0.605, epsilon = 1e-14);
        // for Binomial(2, p) the fixed point is (2p - 1)/p², the first-order
        // value exactly
        let s = survival(&ProcessSpec::new(b, BivariatePmf::atom(1, 0))).unwrap();
        assert_relative_eq!(s.rho_single, 0.1 / 0.3025, epsilon = 1e-12);
        let bern = BivariatePmf::from_entries(&[(0, 0, 0.1), (1, 0, 0.9)], false).unwrap();
        assert!(matches!(first_order_survival(&bern), Err(Error::DegenerateSecondMoment)));
    }

    #[test]
    fn survival_is_monotone_in_the_mean() {
        let mut last = 0.0;
        for i in 0..30 {
            let mu = 1.0 + 0.05 * i as f64;
            let s = survival(&ProcessSpec::new(poisson(mu), BivariatePmf::atom(1, 0))).unwrap();
            assert!(s.rho_single >= last);
            assert!(s.residual <= 1e-12);
            last = s.rho_single;
        }
    }
}
