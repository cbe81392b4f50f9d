//! Parameterised process families `t ↦ (Y_t, Z_t, Y⁰_t, Z⁰_t)` and
//! perturbations of them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::offspring::{fft2_inverse, moments, BivariatePmf, ProcessSpec, MASS_TOL};
use crate::saddle::{asymptotic_params, AsymptoticParams, SaddleConfig};
use crate::survival::{first_order_survival, solve_rho_hat, survival};

/// Points of the grid on which polynomial families are validated.
pub const VALIDATION_GRID: usize = 257;
const ENTRY_TOL: f64 = 1e-12;
const FAMILY_MASS_TOL: f64 = 1e-10;

/// `π[k][l](t) = Σ_i coeffs[i] t^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyEntry {
    pub k: usize,
    pub l: usize,
    pub coeffs: Vec<f64>,
}

impl PolyEntry {
    pub fn new(k: usize, l: usize, coeffs: Vec<f64>) -> Self {
        Self { k, l, coeffs }
    }

    fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    fn derivative(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * t + i as f64 * c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// Every table entry is a polynomial in `t`.
    Polynomial {
        offspring: Vec<PolyEntry>,
        initial: Vec<PolyEntry>,
    },
    /// Offspring Poisson(`t`) × Poisson(`nu`), fixed first generation.
    PoissonT {
        nu: f64,
        tail_tol: f64,
        initial: BivariatePmf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    interval: (f64, f64),
    kind: FamilyKind,
}

impl FamilySpec {
    /// Validates the family on a uniform grid over the interval.
    pub fn new(interval: (f64, f64), kind: FamilyKind) -> Result<Self> {
        let (lo, hi) = interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad interval [{lo}, {hi}]")));
        }
        let family = Self { interval, kind };
        if let FamilyKind::PoissonT { nu, tail_tol, .. } = &family.kind {
            BivariatePmf::product_poisson(lo.max(0.0), *nu, *tail_tol)?;
            if lo < 0.0 {
                return Err(Error::InvalidParameter("Poisson family needs t >= 0".into()));
            }
        }
        for i in 0..VALIDATION_GRID {
            let t = lo + (hi - lo) * i as f64 / (VALIDATION_GRID - 1) as f64;
            family_eval(&family, t)?;
        }
        Ok(family)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// `d/dt E Y_t`.
    pub fn mean_y_slope(&self, t: f64) -> f64 {
        match &self.kind {
            FamilyKind::Polynomial { offspring, .. } => offspring
                .iter()
                .map(|e| e.k as f64 * e.derivative(t))
                .sum(),
            FamilyKind::PoissonT { .. } => 1.0,
        }
    }
}

fn eval_table(entries: &[PolyEntry], t: f64) -> Result<BivariatePmf> {
    let kmax = entries.iter().map(|e| e.k).max().unwrap_or(0);
    let lmax = entries.iter().map(|e| e.l).max().unwrap_or(0);
    let mut probs = vec![0.0; (kmax + 1) * (lmax + 1)];
    for e in entries {
        let mut v = e.eval(t);
        if v < 0.0 {
            if v < -ENTRY_TOL {
                return Err(Error::NegativeEntry {
                    k: e.k,
                    l: e.l,
                    t,
                    value: v,
                });
            }
            v = 0.0;
        }
        probs[e.k * (lmax + 1) + e.l] += v;
    }
    let mass: f64 = probs.iter().sum();
    if (mass - 1.0).abs() > FAMILY_MASS_TOL {
        return Err(Error::MassNotOne { mass });
    }
    if (mass - 1.0).abs() > MASS_TOL {
        probs.iter_mut().for_each(|p| *p /= mass);
    }
    BivariatePmf::from_dense(kmax, lmax, probs, 0.0)
}

/// The process at parameter `t`.
pub fn family_eval(family: &FamilySpec, t: f64) -> Result<ProcessSpec> {
    let (lo, hi) = family.interval;
    if !(t >= lo && t <= hi) {
        return Err(Error::OutOfInterval { t, lo, hi });
    }
    match &family.kind {
        FamilyKind::Polynomial { offspring, initial } => Ok(ProcessSpec::new(
            eval_table(offspring, t)?,
            eval_table(initial, t)?,
        )),
        FamilyKind::PoissonT {
            nu,
            tail_tol,
            initial,
        } => Ok(ProcessSpec::new(
            BivariatePmf::product_poisson(t, *nu, *tail_tol)?,
            initial.clone(),
        )),
    }
}

fn mean_gap(family: &FamilySpec, t: f64) -> Result<f64> {
    Ok(moments(&family_eval(family, t)?.offspring).mean_y - 1.0)
}

/// Critical parameter `t_c` with `E Y_{t_c} = 1`.
pub fn find_tc(family: &FamilySpec) -> Result<f64> {
    let (mut lo, mut hi) = family.interval;
    let mut f_lo = mean_gap(family, lo)?;
    let f_hi = mean_gap(family, hi)?;
    if f_lo == 0.0 {
        return check_slope(family, lo);
    }
    if f_hi == 0.0 {
        return check_slope(family, hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { op: "find_tc" });
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = mean_gap(family, t)?;
        if v.abs() <= 1e-12 && (hi - lo) < 1e-6 || v == 0.0 {
            return check_slope(family, t);
        }
        if v.signum() == f_lo.signum() {
            lo = t;
            f_lo = v;
        } else {
            hi = t;
        }
        let slope = family.mean_y_slope(t);
        let newton = t - v / slope;
        let next = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() < 1e-15 && v.abs() <= 1e-12 {
            return check_slope(family, next);
        }
        t = next;
    }
    let v = mean_gap(family, t)?;
    if v.abs() <= 1e-12 {
        return check_slope(family, t);
    }
    Err(Error::NoConvergence {
        op: "find_tc",
        iterations: 200,
    })
}

fn check_slope(family: &FamilySpec, t: f64) -> Result<f64> {
    let slope = family.mean_y_slope(t);
    if !(slope > 0.0) {
        return Err(Error::NonIncreasingAtRoot { t, slope });
    }
    Ok(t)
}

/// Per-`t` derived quantities. Failed quantities are `NaN` and the cause is
/// kept in `error`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub mean_y: f64,
    pub xi: f64,
    pub theta: f64,
    pub xhat: f64,
    pub rho_single: f64,
    pub rho_process: f64,
    pub error: Option<String>,
}

fn sweep_row(family: &FamilySpec, t: f64, cfg: &SaddleConfig) -> SweepRow {
    let mut row = SweepRow {
        t,
        mean_y: f64::NAN,
        xi: f64::NAN,
        theta: f64::NAN,
        xhat: f64::NAN,
        rho_single: f64::NAN,
        rho_process: f64::NAN,
        error: None,
    };
    let spec = match family_eval(family, t) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(format!("family_eval: {e}"));
            return row;
        }
    };
    row.mean_y = moments(&spec.offspring).mean_y;
    let mut errors = Vec::new();
    match asymptotic_params(&spec, cfg) {
        Ok(p) => {
            row.xi = p.xi;
            row.theta = p.theta;
            row.xhat = p.xhat;
        }
        Err(e) => errors.push(format!("asymptotic_params: {e}")),
    }
    match survival(&spec) {
        Ok(s) => {
            row.rho_single = s.rho_single;
            row.rho_process = s.rho_process;
        }
        Err(e) => errors.push(format!("survival: {e}")),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Evaluates every grid point (in parallel), keeping input order.
pub fn sweep(family: &FamilySpec, grid: &[f64], cfg: &SaddleConfig) -> Vec<SweepRow> {
    grid.par_iter().map(|&t| sweep_row(family, t, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalExpansion {
    pub tc: f64,
    /// `a₁, …, a_order`.
    pub coeffs: Vec<f64>,
    /// Largest absolute fit residual.
    pub residual: f64,
    /// `2 (d/dt E Y_t) / E Y(Y-1)` at `t_c`.
    pub chain_rule_a1: f64,
}

/// Grid of `ε` values for [`survival_expansion`].
pub fn expansion_grid() -> Vec<f64> {
    const POINTS: usize = 24;
    let (lo, hi) = (1e-3f64.ln(), 5e-2f64.ln());
    (0..POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp())
        .collect()
}

/// Least-squares fit `ρ(t_c + ε) ≈ Σ_{i≤order} a_i ε^i` of the
/// single-ancestor survival probability.
pub fn survival_expansion(family: &FamilySpec, order: usize) -> Result<SurvivalExpansion> {
    if order == 0 || order > 4 {
        return Err(Error::InvalidParameter(format!("order {order} outside 1..=4")));
    }
    let tc = find_tc(family)?;
    let eps = expansion_grid();
    let mut rho = Vec::with_capacity(eps.len());
    for &e in &eps {
        rho.push(survival(&family_eval(family, tc + e)?)?.rho_single);
    }
    let scale = *eps.last().unwrap();
    let design = DMatrix::from_fn(eps.len(), order, |i, j| (eps[i] / scale).powi(j as i32 + 1));
    let rhs = DVector::from_vec(rho.clone());
    let svd = design.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    let fitted = &design * &sol;
    let residual = (fitted - rhs).amax();
    let coeffs = (0..order)
        .map(|j| sol[j] / scale.powi(j as i32 + 1))
        .collect();
    let at_tc = family_eval(family, tc)?;
    let fact2 = moments(&at_tc.offspring).fact2_y;
    if !(fact2 > 0.0) {
        return Err(Error::DegenerateSecondMoment);
    }
    Ok(SurvivalExpansion {
        tc,
        coeffs,
        residual,
        chain_rule_a1: 2.0 * family.mean_y_slope(tc) / fact2,
    })
}

fn pad_pair(a: &BivariatePmf, b: &BivariatePmf) -> (BivariatePmf, BivariatePmf) {
    let k = a.kmax().max(b.kmax());
    let l = a.lmax().max(b.lmax());
    (a.padded(k, l), b.padded(k, l))
}

fn mix_table(a: &BivariatePmf, b: &BivariatePmf, u: f64) -> Result<BivariatePmf> {
    let (a, b) = pad_pair(a, b);
    let probs = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (1.0 - u) * x + u * y)
        .collect();
    let tail = (1.0 - u) * a.tail_mass_bound() + u * b.tail_mass_bound();
    BivariatePmf::from_dense(a.kmax(), a.lmax(), probs, tail)
}

/// Entrywise mixture `(1-u) a + u b` of both laws.
pub fn mixture(spec_a: &ProcessSpec, spec_b: &ProcessSpec, u: f64) -> Result<ProcessSpec> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("mixture weight {u} outside [0, 1]")));
    }
    Ok(ProcessSpec::new(
        mix_table(&spec_a.offspring, &spec_b.offspring, u)?,
        mix_table(&spec_a.initial, &spec_b.initial, u)?,
    ))
}

/// Max of `|Σ d[k][l] y^k z^l|` over the `size × size` grid on
/// `|y| = |z| = r`.
fn torus_max(a: &BivariatePmf, b: &BivariatePmf, r: f64, size: usize, planner: &mut FftPlanner<f64>) -> f64 {
    let (a, b) = pad_pair(a, b);
    let mut grid = vec![Complex64::new(0.0, 0.0); size * size];
    let ln_r = r.ln();
    let w = a.lmax() + 1;
    for (i, (x, y)) in a.as_slice().iter().zip(b.as_slice()).enumerate() {
        let d = x - y;
        if d != 0.0 {
            let (k, l) = (i / w, i % w);
            grid[(k % size) * size + l % size] += d * (ln_r * (k + l) as f64).exp();
        }
    }
    fft2_inverse(&mut grid, size, planner);
    grid.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Sup-distance of the pgfs of two processes over the polydisk of radius
/// `r_max`, estimated on torus grids at radii `R^{1/4}, …, R` with grid
/// doubling until the estimate changes by at most `1e-10`.
///
/// Grid maxima can only under-estimate the true supremum.
pub fn eta_distance(spec_a: &ProcessSpec, spec_b: &ProcessSpec, r_max: f64, samples: usize) -> Result<f64> {
    if !(r_max > 1.0) {
        return Err(Error::InvalidParameter(format!("R = {r_max} must exceed 1")));
    }
    const MAX_GRID: usize = 1024;
    let mut planner = FftPlanner::new();
    let estimate = |size: usize, planner: &mut FftPlanner<f64>| {
        let mut best: f64 = 0.0;
        for q in 1..=4 {
            let r = r_max.powf(q as f64 / 4.0);
            best = best.max(torus_max(&spec_a.offspring, &spec_b.offspring, r, size, planner));
            best = best.max(torus_max(&spec_a.initial, &spec_b.initial, r, size, planner));
        }
        best
    };
    let mut size = samples.max(4).next_power_of_two();
    let mut prev = estimate(size, &mut planner);
    while size < MAX_GRID {
        size *= 2;
        let cur = estimate(size, &mut planner);
        if (cur - prev).abs() <= 1e-10 {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// Settings for [`perturbation_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    pub r: f64,
    pub samples: usize,
    pub saddle: SaddleConfig,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            r: 2.0,
            samples: 32,
            saddle: SaddleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    pub t: f64,
    pub tc: f64,
    pub eta: f64,
    pub xi_base: f64,
    pub xi_perturbed: f64,
    pub xi_gap: f64,
    pub rho_base: f64,
    pub rho_perturbed: f64,
    pub rho_gap: f64,
    /// `η |t - t_c| + η²`.
    pub bound_xi: f64,
    /// `η`.
    pub bound_rho: f64,
}

/// Compares `ξ` and the whole-process survival probability of `perturbed`
/// with those of the family member at `t`.
pub fn perturbation_check(
    family: &FamilySpec,
    t: f64,
    perturbed: &ProcessSpec,
    cfg: &PerturbConfig,
) -> Result<PerturbationReport> {
    let tc = find_tc(family)?;
    let base = family_eval(family, t)?;
    let eta = eta_distance(&base, perturbed, cfg.r, cfg.samples)?;
    let xi_base = asymptotic_params(&base, &cfg.saddle)?.xi;
    let xi_perturbed = asymptotic_params(perturbed, &cfg.saddle)?.xi;
    let rho_base = survival(&base)?.rho_process;
    let rho_perturbed = survival(perturbed)?.rho_process;
    Ok(PerturbationReport {
        t,
        tc,
        eta,
        xi_base,
        xi_perturbed,
        xi_gap: (xi_perturbed - xi_base).abs(),
        rho_base,
        rho_perturbed,
        rho_gap: (rho_perturbed - rho_base).abs(),
        bound_xi: eta * (t - tc).abs() + eta * eta,
        bound_rho: eta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureDerivs {
    pub dxi_du: f64,
    pub dtheta_du: f64,
    pub drho_du: f64,
}

fn path_values(a: &ProcessSpec, b: &ProcessSpec, u: f64, cfg: &SaddleConfig) -> Result<(AsymptoticParams, f64)> {
    let spec = mixture(a, b, u)?;
    let params = asymptotic_params(&spec, cfg)?;
    let rho_hat = solve_rho_hat(&spec.offspring)?;
    Ok((params, rho_hat))
}

/// Central differences of `ξ`, `θ` and `ρ̂` along the mixture path
/// `u ↦ (1-u) a + u b`.
pub fn finite_diff_family_derivs(
    spec_a: &ProcessSpec,
    spec_b: &ProcessSpec,
    u: f64,
    h: f64,
    cfg: &SaddleConfig,
) -> Result<MixtureDerivs> {
    if !(h > 0.0) || u - h < 0.0 || u + h > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "need h > 0 and u ± h inside [0, 1] (u={u}, h={h})"
        )));
    }
    let (lo, rho_lo) = path_values(spec_a, spec_b, u - h, cfg)?;
    let (hi, rho_hi) = path_values(spec_a, spec_b, u + h, cfg)?;
    let w = 2.0 * h;
    Ok(MixtureDerivs {
        dxi_du: (hi.xi - lo.xi) / w,
        dtheta_du: (hi.theta - lo.theta) / w,
        drho_du: (rho_hi - rho_lo) / w,
    })
}

/// First-order survival at `t_c + ε`, a convenience for sweep diagnostics.
pub fn first_order_at(family: &FamilySpec, t: f64) -> Result<f64> {
    first_order_survival(&family_eval(family, t)?.offspring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{binomial_family, poisson, poisson_family};

    fn constant_family() -> FamilySpec {
        FamilySpec::new(
            (0.0, 1.0),
            FamilyKind::Polynomial {
                offspring: vec![PolyEntry::new(0, 0, vec![0.5]), PolyEntry::new(1, 1, vec![0.5])],
                initial: vec![PolyEntry::new(1, 0, vec![1.0])],
            },
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let c = constant_family();
        for t in [0.0, 0.3, 1.0] {
            let s = family_eval(&c, t).unwrap();
            assert_eq!(s.offspring.prob(0, 0), 0.5);
            assert_eq!(s.offspring.prob(1, 1), 0.5);
        }
        assert!(matches!(family_eval(&c, 1.5), Err(Error::OutOfInterval { .. })));
        let b = family_eval(&binomial_family(), 1.0).unwrap();
        for (k, expect) in [(0, 0.25), (1, 0.5), (2, 0.25)] {
            assert!((b.offspring.prob(k, 0) + b.offspring.prob(k, 1) - expect).abs() < 1e-15);
            assert!((b.offspring.prob(k, 1) - 0.5 * expect).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_entries_rejected() {
        let bad = FamilySpec::new(
            (0.0, 2.0),
            FamilyKind::Polynomial {
                offspring: vec![PolyEntry::new(0, 0, vec![1.0, -1.0]), PolyEntry::new(1, 0, vec![0.0, 1.0])],
                initial: vec![PolyEntry::new(1, 0, vec![1.0])],
            },
        );
        assert!(matches!(bad, Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn tc_examples() {
        assert!((find_tc(&binomial_family()).unwrap() - 1.0).abs() < 1e-12);
        let tc = find_tc(&poisson_family()).unwrap();
        assert!((tc - 1.0).abs() < 1e-10);
        let spec = family_eval(&poisson_family(), tc).unwrap();
        assert!((moments(&spec.offspring).mean_y - 1.0).abs() <= 1e-12);
        assert!(matches!(find_tc(&constant_family()), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn sweep_rows_in_order() {
        let f = binomial_family();
        let grid = [0.9, 1.0, 1.05, 2.5];
        let rows = sweep(&f, &grid, &SaddleConfig::default());
        assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), grid);
        assert!(rows[1].xi <= 1e-10 && rows[1].rho_process <= 1e-10);
        assert!(rows[0].xi > 0.0 && rows[0].rho_process == 0.0);
        assert!(rows[2].rho_process > 0.0);
        assert!(rows[3].error.is_some() && rows[3].xi.is_nan());
    }

    #[test]
    fn expansion_matches_chain_rule() {
        for f in [binomial_family(), poisson_family()] {
            let e = survival_expansion(&f, 4).unwrap();
            assert!(e.coeffs[0] > 0.0);
            assert!((e.coeffs[0] / e.chain_rule_a1 - 1.0).abs() < 0.01, "{e:?}");
            assert!(e.residual <= 1e-6, "{e:?}");
        }
        assert!(survival_expansion(&binomial_family(), 5).is_err());
    }

    #[test]
    fn mixture_examples() {
        let a = poisson(0.9, 1.0);
        let b = poisson(1.3, 0.7);
        let at0 = mixture(&a, &b, 0.0).unwrap();
        let at1 = mixture(&a, &b, 1.0).unwrap();
        let (ma, mb) = (moments(&a.offspring).mean_y, moments(&b.offspring).mean_y);
        assert_eq!(moments(&at0.offspring).mean_y, ma);
        assert!((moments(&at1.offspring).mean_y - mb).abs() < 1e-15);
        let mid = mixture(&a, &b, 0.3).unwrap();
        assert!((moments(&mid.offspring).mean_y - (0.7 * ma + 0.3 * mb)).abs() < 1e-14);
        assert!(mixture(&a, &b, 1.5).is_err());
    }

    #[test]
    fn eta_examples() {
        let a = poisson(0.9, 1.0);
        assert_eq!(eta_distance(&a, &a, 2.0, 16).unwrap(), 0.0);
        let b = poisson(1.3, 0.7);
        let full = eta_distance(&a, &b, 2.0, 16).unwrap();
        let part = eta_distance(&a, &mixture(&a, &b, 0.25).unwrap(), 2.0, 16).unwrap();
        assert!(part <= 0.25 * full * (1.0 + 1e-12));

        let shift = |d: f64| {
            BivariatePmf::from_entries(&[(0, 0, 0.5 - d), (1, 0, 0.5 + d)], false).unwrap()
        };
        let x = ProcessSpec::new(shift(0.0), BivariatePmf::atom(1, 0));
        let y = ProcessSpec::new(shift(1e-3), BivariatePmf::atom(1, 0));
        let eta = eta_distance(&x, &y, 2.0, 16).unwrap();
        assert!((eta - 1e-3 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_of_self_is_zero() {
        let f = poisson_family();
        let base = family_eval(&f, 1.04).unwrap();
        let r = perturbation_check(&f, 1.04, &base, &PerturbConfig::default()).unwrap();
        assert_eq!((r.eta, r.xi_gap, r.rho_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn derivatives_along_paths() {
        let a = poisson(0.95, 1.0);
        let d = finite_diff_family_derivs(&a, &a, 0.5, 1e-3, &SaddleConfig::default()).unwrap();
        assert_eq!((d.dxi_du, d.dtheta_du), (0.0, 0.0));
        let b = poisson(1.05, 1.0);
        let d = finite_diff_family_derivs(&a, &b, 0.5, 1e-3, &SaddleConfig::default()).unwrap();
        let lambda = eta_distance(&a, &b, 2.0, 16).unwrap();
        assert!(d.dxi_du.abs() <= 1e-3 * lambda, "{d:?}");
        assert!(finite_diff_family_derivs(&a, &b, 0.0, 1e-3, &SaddleConfig::default()).is_err());
    }
}
