//! Bivariate offspring laws and their generating functions.
//!
//! A [`BivariatePmf`] is a dense table `π[k][l] = P(Y = k, Z = l)` for
//! `k ≤ kmax`, `l ≤ lmax`. Infinite-support laws are truncated, and the
//! discarded mass is carried along as `tail_mass_bound`.
//!
//! Derivatives of the log-mgf `φ = log E e^{αY + βZ}` are computed by exact
//! weighted summation over the table with a max-shift, so they stay finite
//! far outside the unit polydisk.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Tolerance on total mass when validating a table.
pub const MASS_TOL: f64 = 1e-12;

/// Default truncation tolerance for infinite-support families.
pub const DEFAULT_TAIL_TOL: f64 = 1e-15;

/// Joint law of a pair of non-negative integer variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePmf {
    probs: Vec<f64>,
    kmax: usize,
    lmax: usize,
    tail_mass_bound: f64,
}

/// Offspring law plus first-generation law.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    /// Law of `(Y, Z)`, the children of one type-L particle.
    pub offspring: BivariatePmf,
    /// Law of `(Y⁰, Z⁰)`, the first generation.
    pub initial: BivariatePmf,
}

impl ProcessSpec {
    pub fn new(offspring: BivariatePmf, initial: BivariatePmf) -> Self {
        Self { offspring, initial }
    }
}

/// Parameters of the moment and non-lattice conditions a law may satisfy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParams {
    pub r: f64,
    pub m: f64,
    pub k1: usize,
    pub k2: usize,
    pub delta: f64,
}

impl Default for ClassParams {
    fn default() -> Self {
        Self {
            r: std::f64::consts::E * std::f64::consts::E,
            m: 1e6,
            k1: 0,
            k2: 0,
            delta: 0.01,
        }
    }
}

impl ClassParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0) || !(self.m >= 1.0) || !(self.delta > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "class params need R > 1, 1 <= M < inf, delta > 0 (got R={}, M={}, delta={})",
                self.r, self.m, self.delta
            )));
        }
        Ok(())
    }

    /// Half-width of the working box for saddle points, `½ ln R`.
    pub fn box_radius(&self) -> f64 {
        0.5 * self.r.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub mean_y: f64,
    pub mean_z: f64,
    /// `E Y(Y-1)`.
    pub fact2_y: f64,
}

/// Outcome of the moment-boundedness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Report {
    pub passes: bool,
    /// `E R^{Y+Z}` including the charge for truncated mass.
    pub moment: f64,
    pub mean_y: f64,
}

/// Outcome of the non-lattice support check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K1Report {
    pub passes: bool,
    /// `π[k1][k2]`, `π[k1+1][k2]`, `π[k1][k2+1]`.
    pub entries: [f64; 3],
}

/// Log-mgf value, gradient and Hessian at a real point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMgfDerivs {
    pub phi: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl LogMgfDerivs {
    pub fn det(&self) -> f64 {
        self.hess[0][0] * self.hess[1][1] - self.hess[0][1] * self.hess[1][0]
    }

    /// Smallest eigenvalue of the (symmetric) Hessian.
    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.hess[0][0];
        let c = self.hess[1][1];
        let b = self.hess[0][1];
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        mid - rad
    }
}

impl BivariatePmf {
    /// Builds a table from `(k, l, p)` triples.
    ///
    /// With `normalize` set, the entries are rescaled to unit mass instead
    /// of being rejected.
    pub fn from_entries(entries: &[(usize, usize, f64)], normalize: bool) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::MassNotOne { mass: 0.0 });
        }
        let kmax = entries.iter().map(|e| e.0).max().unwrap_or(0);
        let lmax = entries.iter().map(|e| e.1).max().unwrap_or(0);
        let width = lmax + 1;
        let mut probs = vec![0.0; (kmax + 1) * width];
        let mut seen = vec![false; probs.len()];
        for &(k, l, p) in entries {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::NegativeProbability { k, l, p });
            }
            let idx = k * width + l;
            if seen[idx] {
                return Err(Error::DuplicateIndex { k, l });
            }
            seen[idx] = true;
            probs[idx] = p;
        }
        let mass: f64 = probs.iter().sum();
        if normalize {
            if !(mass > 0.0) {
                return Err(Error::MassNotOne { mass });
            }
            probs.iter_mut().for_each(|p| *p /= mass);
        } else if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotOne { mass });
        }
        Self::from_dense(kmax, lmax, probs, 0.0)
    }

    /// Single atom at `(k, l)`.
    pub fn atom(k: usize, l: usize) -> Self {
        let mut probs = vec![0.0; (k + 1) * (l + 1)];
        probs[k * (l + 1) + l] = 1.0;
        Self {
            probs,
            kmax: k,
            lmax: l,
            tail_mass_bound: 0.0,
        }
    }

    /// Row-major table with `(kmax + 1) * (lmax + 1)` entries.
    pub fn from_dense(kmax: usize, lmax: usize, probs: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        let width = lmax + 1;
        if probs.len() != (kmax + 1) * width {
            return Err(Error::InvalidParameter(format!(
                "dense table has {} entries, expected {}",
                probs.len(),
                (kmax + 1) * width
            )));
        }
        if !(0.0..1.0).contains(&tail_mass_bound) {
            return Err(Error::InvalidParameter(format!(
                "tail mass bound {tail_mass_bound} outside [0, 1)"
            )));
        }
        for (idx, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::NegativeProbability {
                    k: idx / width,
                    l: idx % width,
                    p,
                });
            }
        }
        let mass: f64 = probs.iter().sum();
        if mass > 1.0 + MASS_TOL || mass < 1.0 - tail_mass_bound - MASS_TOL {
            return Err(Error::MassNotOne { mass });
        }
        Ok(Self {
            probs,
            kmax,
            lmax,
            tail_mass_bound,
        })
    }

    /// Independent Poisson(`mu`) × Poisson(`nu`), truncated so the dropped
    /// mass is at most `tail_tol`.
    pub fn product_poisson(mu: f64, nu: f64, tail_tol: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite() && nu >= 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Poisson means must be finite and non-negative (mu={mu}, nu={nu})"
            )));
        }
        if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "tail_tol {tail_tol} outside (0, 1e-6]"
            )));
        }
        let (py, ty) = truncated_poisson(mu, 0.5 * tail_tol);
        let (pz, tz) = truncated_poisson(nu, 0.5 * tail_tol);
        let kmax = py.len() - 1;
        let lmax = pz.len() - 1;
        let mut probs = Vec::with_capacity(py.len() * pz.len());
        for &a in &py {
            for &b in &pz {
                probs.push(a * b);
            }
        }
        Self::from_dense(kmax, lmax, probs, ty + tz)
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    /// `P(Y = k, Z = l)`; zero outside the table.
    pub fn prob(&self, k: usize, l: usize) -> f64 {
        if k > self.kmax || l > self.lmax {
            0.0
        } else {
            self.probs[k * (self.lmax + 1) + l]
        }
    }

    /// Row `k` of the table, indexed by `l`.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.lmax + 1;
        &self.probs[k * w..(k + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Non-zero entries as `(k, l, p)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.lmax + 1;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(i, &p)| (i / w, i % w, p))
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal law of `Y`.
    pub fn marginal_y(&self) -> Vec<f64> {
        (0..=self.kmax).map(|k| self.row(k).iter().sum()).collect()
    }

    /// Same law on a larger `(kmax, lmax)` grid.
    pub fn padded(&self, kmax: usize, lmax: usize) -> Self {
        assert!(kmax >= self.kmax && lmax >= self.lmax);
        let mut probs = vec![0.0; (kmax + 1) * (lmax + 1)];
        for k in 0..=self.kmax {
            let dst = k * (lmax + 1);
            probs[dst..dst + self.lmax + 1].copy_from_slice(self.row(k));
        }
        Self {
            probs,
            kmax,
            lmax,
            tail_mass_bound: self.tail_mass_bound,
        }
    }

    pub(crate) fn width(&self) -> usize {
        self.lmax + 1
    }
}

fn truncated_poisson(mean: f64, tol: f64) -> (Vec<f64>, f64) {
    if mean == 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut pmf = vec![(-mean).exp()];
    let mut k = 0usize;
    loop {
        let tail = poisson_tail(mean, k, pmf[k]);
        if tail <= tol {
            return (pmf, tail);
        }
        k += 1;
        let next = pmf[k - 1] * mean / k as f64;
        pmf.push(next);
    }
}

/// `P(X > k)` given `P(X = k)`, summed forward until terms vanish.
fn poisson_tail(mean: f64, k: usize, pk: f64) -> f64 {
    let mut term = pk;
    let mut sum = 0.0;
    let mut j = k;
    loop {
        j += 1;
        term *= mean / j as f64;
        sum += term;
        if term < 1e-30 * sum.max(1e-300) || term == 0.0 {
            break;
        }
        if j > k + 10_000 {
            break;
        }
    }
    sum
}

/// Moments by direct summation over the table.
pub fn moments(pmf: &BivariatePmf) -> MomentSummary {
    let mut mean_y = 0.0;
    let mut mean_z = 0.0;
    let mut fact2_y = 0.0;
    for (k, l, p) in pmf.entries() {
        let kf = k as f64;
        mean_y += p * kf;
        mean_z += p * l as f64;
        fact2_y += p * kf * (kf - 1.0);
    }
    MomentSummary {
        mean_y,
        mean_z,
        fact2_y,
    }
}

/// `E binom(Y, j)` for `j = 0..=order`.
pub fn binomial_moments_y(pmf: &BivariatePmf, order: usize) -> Vec<f64> {
    let marg = pmf.marginal_y();
    (0..=order)
        .map(|j| {
            marg.iter()
                .enumerate()
                .map(|(k, &p)| p * binom(k, j))
                .sum()
        })
        .collect()
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Bivariate pgf `Σ π[k][l] y^k z^l`.
pub fn pgf(pmf: &BivariatePmf, y: Complex64, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (0..=pmf.kmax).rev() {
        let mut row = Complex64::new(0.0, 0.0);
        for &p in pmf.row(k).iter().rev() {
            row = row * z + p;
        }
        acc = acc * y + row;
    }
    acc
}

/// Marginal pgf of `Y` at a real point.
pub fn pgf_y(pmf: &BivariatePmf, s: f64) -> f64 {
    pmf.marginal_y().iter().rev().fold(0.0, |acc, &p| acc * s + p)
}

/// Moment generating function `f(y, z) = g(e^y, e^z)`.
pub fn mgf(pmf: &BivariatePmf, y: Complex64, z: Complex64) -> Complex64 {
    pgf(pmf, y.exp(), z.exp())
}

/// Exponentially tilted weights `π[k][l] w(k) e^{αk+βl}` summarised as
/// log-mass, mean and covariance.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tilted {
    pub log_mass: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

pub(crate) fn tilted(
    pmf: &BivariatePmf,
    alpha: f64,
    beta: f64,
    weight: impl Fn(usize) -> f64,
) -> Option<Tilted> {
    let w = pmf.width();
    let mut shift = f64::NEG_INFINITY;
    for (i, &p) in pmf.probs.iter().enumerate() {
        let wk = weight(i / w);
        if p > 0.0 && wk > 0.0 {
            let e = p.ln() + wk.ln() + alpha * (i / w) as f64 + beta * (i % w) as f64;
            shift = shift.max(e);
        }
    }
    if shift == f64::NEG_INFINITY {
        return None;
    }
    let mut s0 = 0.0;
    let mut s1 = [0.0; 2];
    let mut terms = Vec::with_capacity(pmf.probs.len());
    for (i, &p) in pmf.probs.iter().enumerate() {
        let (k, l) = (i / w, i % w);
        let wk = weight(k);
        if p > 0.0 && wk > 0.0 {
            let t = (p.ln() + wk.ln() + alpha * k as f64 + beta * l as f64 - shift).exp();
            s0 += t;
            s1[0] += t * k as f64;
            s1[1] += t * l as f64;
            terms.push((k as f64, l as f64, t));
        }
    }
    let mean = [s1[0] / s0, s1[1] / s0];
    let mut cov = [[0.0; 2]; 2];
    for &(k, l, t) in &terms {
        let dk = k - mean[0];
        let dl = l - mean[1];
        cov[0][0] += t * dk * dk;
        cov[0][1] += t * dk * dl;
        cov[1][1] += t * dl * dl;
    }
    for row in cov.iter_mut() {
        for c in row.iter_mut() {
            *c /= s0;
        }
    }
    cov[1][0] = cov[0][1];
    Some(Tilted {
        log_mass: shift + s0.ln(),
        mean,
        cov,
    })
}

/// Value, gradient and Hessian of `φ = log f` at real `(α, β)`.
pub fn log_mgf_derivs(pmf: &BivariatePmf, alpha: f64, beta: f64) -> LogMgfDerivs {
    let t = tilted(pmf, alpha, beta, |_| 1.0).expect("a valid pmf has positive mass");
    LogMgfDerivs {
        phi: t.log_mass,
        grad: t.mean,
        hess: t.cov,
    }
}

/// `f̃₀(α, β) = E[Y⁰ e^{αY⁰ + βZ⁰}]`.
pub fn tilde_f0(initial: &BivariatePmf, alpha: f64, beta: f64) -> f64 {
    initial
        .entries()
        .map(|(k, l, p)| p * k as f64 * (alpha * k as f64 + beta * l as f64).exp())
        .sum()
}

/// Moment-boundedness check: `E R^{Y+Z} ≤ M` and `E Y ≥ δ`, summed over
/// the stored table.
pub fn check_k0(pmf: &BivariatePmf, params: &ClassParams) -> K0Report {
    let ln_r = params.r.ln();
    let moment: f64 = pmf
        .entries()
        .map(|(k, l, p)| p * (ln_r * (k + l) as f64).exp())
        .sum();
    let mean_y = moments(pmf).mean_y;
    K0Report {
        passes: moment <= params.m && mean_y >= params.delta,
        moment,
        mean_y,
    }
}

/// Non-lattice check: the three entries around `(k1, k2)` are all `≥ δ`.
pub fn check_k1(pmf: &BivariatePmf, params: &ClassParams) -> K1Report {
    let (a, b) = (params.k1, params.k2);
    let entries = [pmf.prob(a, b), pmf.prob(a + 1, b), pmf.prob(a, b + 1)];
    K1Report {
        passes: entries.iter().all(|&p| p >= params.delta),
        entries,
    }
}

/// Values of `Σ π[k][l] c(k) e^{(a + iu)k + (b + iv)l}` on the `size × size`
/// torus grid `u, v ∈ 2π/size · {0, …, size-1}`, divided by `e^{shift}`.
///
/// Indices are folded modulo `size`, so values at grid points are exact for
/// any table size. Returns the grid (row index = u) and `shift`.
pub(crate) fn torus_grid(
    pmf: &BivariatePmf,
    log_ry: f64,
    log_rz: f64,
    size: usize,
    weight: impl Fn(usize) -> f64,
    planner: &mut FftPlanner<f64>,
) -> Option<(Vec<Complex64>, f64)> {
    let mut shift = f64::NEG_INFINITY;
    for (k, l, p) in pmf.entries() {
        let wk = weight(k);
        if wk > 0.0 {
            shift = shift.max(p.ln() + wk.ln() + log_ry * k as f64 + log_rz * l as f64);
        }
    }
    if shift == f64::NEG_INFINITY {
        return None;
    }
    let mut grid = vec![Complex64::new(0.0, 0.0); size * size];
    for (k, l, p) in pmf.entries() {
        let wk = weight(k);
        if wk > 0.0 {
            let t = (p.ln() + wk.ln() + log_ry * k as f64 + log_rz * l as f64 - shift).exp();
            grid[(k % size) * size + (l % size)] += t;
        }
    }
    fft2_inverse(&mut grid, size, planner);
    Some((grid, shift))
}

/// Unnormalised 2-D inverse DFT, `X[j][m] = Σ x[k][l] e^{+2πi(jk + ml)/size}`.
pub(crate) fn fft2_inverse(grid: &mut [Complex64], size: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_inverse(size);
    for row in grid.chunks_exact_mut(size) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); size];
    for c in 0..size {
        for r in 0..size {
            col[r] = grid[r * size + c];
        }
        fft.process(&mut col);
        for r in 0..size {
            grid[r * size + c] = col[r];
        }
    }
}
