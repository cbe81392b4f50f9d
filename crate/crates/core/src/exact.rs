//! Exact point probabilities by coefficient extraction.
//!
//! For `n ≥ 1`,
//!
//! ```text
//! n · p[n][m] = [y^n z^m] ( g̃₀(y, z) · g(y, z)^n ),   g̃₀ = y ∂_y g₀,
//! ```
//!
//! so one pass of repeated truncated convolution `g^n = g^{n-1} · g` yields
//! every `p[n][m]` with `n + m ≤ Nmax`. The fixed-point route through the
//! size generating function is kept alongside as an independent oracle.

use crate::error::{Error, Result};
use crate::offspring::{BivariatePmf, ProcessSpec};

/// Default upper bound on `Nmax`.
pub const DEFAULT_CAPACITY: usize = 2000;

/// Dense coefficient matrix stored relative to `e^{log_scale}`.
#[derive(Debug, Clone)]
pub struct ScaledCoeffMatrix {
    coeffs: Vec<f64>,
    rows: usize,
    cols: usize,
    log_scale: f64,
}

impl ScaledCoeffMatrix {
    /// The constant series `1`.
    pub fn one(rows: usize, cols: usize) -> Self {
        let mut coeffs = vec![0.0; rows * cols];
        coeffs[0] = 1.0;
        Self {
            coeffs,
            rows,
            cols,
            log_scale: 0.0,
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Stored (scaled) coefficient of `y^k z^m`.
    pub fn stored(&self, k: usize, m: usize) -> f64 {
        if k < self.rows && m < self.cols {
            self.coeffs[k * self.cols + m]
        } else {
            0.0
        }
    }

    /// True coefficient of `y^k z^m`.
    pub fn coeff(&self, k: usize, m: usize) -> f64 {
        self.stored(k, m) * self.log_scale.exp()
    }

    pub fn max_stored(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Rescales so the largest stored entry is 1.
    pub fn renormalize(&mut self) {
        let max = self.max_stored();
        if max > 0.0 && max.is_finite() {
            let inv = 1.0 / max;
            self.coeffs.iter_mut().for_each(|c| *c *= inv);
            self.log_scale += max.ln();
        }
    }

    /// Multiplies by the table `pmf` in place, keeping only coefficients
    /// `y^k z^m` with `k + m ≤ total_cap` and `m ≤ z_cap`.
    pub fn mul_truncated(&mut self, pmf: &BivariatePmf, total_cap: usize, z_cap: usize) {
        let cols = self.cols;
        let mut out = vec![0.0; self.rows * cols];
        for (a, b, p) in pmf.entries() {
            for k in a..self.rows {
                if k > total_cap {
                    break;
                }
                let m_hi = z_cap.min(total_cap - k).min(cols - 1);
                if m_hi < b {
                    continue;
                }
                let src = &self.coeffs[(k - a) * cols..(k - a) * cols + cols];
                let dst = &mut out[k * cols..k * cols + cols];
                for (d, s) in dst[b..=m_hi].iter_mut().zip(&src[..=m_hi - b]) {
                    *d += p * s;
                }
            }
        }
        self.coeffs = out;
    }
}

/// `p[n][m] = P(|X^L| = n, |X^S| = m)` for `n + m ≤ Nmax`.
#[derive(Debug, Clone)]
pub struct PointProbTable {
    nmax: usize,
    log_p: Vec<f64>,
}

impl PointProbTable {
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn log_p(&self, n: usize, m: usize) -> f64 {
        if n + m > self.nmax {
            return f64::NAN;
        }
        self.log_p[n * (self.nmax + 1) + m]
    }

    pub fn p(&self, n: usize, m: usize) -> f64 {
        self.log_p(n, m).exp()
    }
}

/// `q[N] = P(|X| = N)` for `0 ≤ N ≤ Nmax`.
///
/// `q[0]` is the probability of an empty first generation.
#[derive(Debug, Clone)]
pub struct TotalProbTable {
    log_q: Vec<f64>,
}

impl TotalProbTable {
    pub fn from_log(log_q: Vec<f64>) -> Self {
        Self { log_q }
    }

    pub fn from_linear(q: &[f64]) -> Self {
        Self {
            log_q: q.iter().map(|v| v.ln()).collect(),
        }
    }

    pub fn nmax(&self) -> usize {
        self.log_q.len() - 1
    }

    pub fn q(&self, n: usize) -> f64 {
        self.log_q[n].exp()
    }

    pub fn log_q(&self, n: usize) -> f64 {
        self.log_q[n]
    }

    /// `q[1..=Nmax]`.
    pub fn values(&self) -> Vec<f64> {
        self.log_q[1..].iter().map(|v| v.exp()).collect()
    }
}

fn check_capacity(nmax: usize, capacity: usize) -> Result<()> {
    if nmax < 1 {
        return Err(Error::InvalidIndex("Nmax must be at least 1".into()));
    }
    if nmax > capacity {
        return Err(Error::CapacityExceeded {
            requested: nmax,
            limit: capacity,
        });
    }
    Ok(())
}

/// `(n0 / n) · P(n0 + Σ_{j≤n} Y_j = n, m0 + Σ_{j≤n} Z_j = m)` by explicit
/// `n`-fold convolution.
pub fn otter_dwass_conditional(
    offspring: &BivariatePmf,
    n: usize,
    m: usize,
    n0: usize,
    m0: usize,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidIndex("n must be at least 1".into()));
    }
    if n0 == 0 || n0 > n || m0 > m {
        return Ok(0.0);
    }
    let (ty, tz) = (n - n0, m - m0);
    let mut pow = ScaledCoeffMatrix::one(ty + 1, tz + 1);
    for _ in 0..n {
        pow.mul_truncated(offspring, ty + tz, tz);
        pow.renormalize();
    }
    Ok(n0 as f64 / n as f64 * pow.coeff(ty, tz))
}

/// Point probabilities by truncated powers of the offspring pgf.
pub fn point_prob_table(spec: &ProcessSpec, nmax: usize) -> Result<PointProbTable> {
    point_prob_table_with_capacity(spec, nmax, DEFAULT_CAPACITY)
}

pub fn point_prob_table_with_capacity(
    spec: &ProcessSpec,
    nmax: usize,
    capacity: usize,
) -> Result<PointProbTable> {
    check_capacity(nmax, capacity)?;
    let stride = nmax + 1;
    let mut log_p = vec![f64::NEG_INFINITY; stride * stride];

    for m in 0..=nmax {
        log_p[m] = spec.initial.prob(0, m).ln();
    }

    let weighted: Vec<(usize, usize, f64)> = spec
        .initial
        .entries()
        .filter(|&(k, _, _)| k >= 1)
        .map(|(k, l, p)| (k, l, p * k as f64))
        .collect();

    let mut pow = ScaledCoeffMatrix::one(stride, stride);
    for n in 1..=nmax {
        // later powers only need z-degree up to nmax - n
        pow.mul_truncated(&spec.offspring, nmax, nmax - n);
        pow.renormalize();
        let scale = pow.log_scale() - (n as f64).ln();
        for m in 0..=(nmax - n) {
            let mut acc = 0.0;
            for &(k0, l0, w) in &weighted {
                if k0 <= n && l0 <= m {
                    acc += w * pow.stored(n - k0, m - l0);
                }
            }
            log_p[n * stride + m] = if acc > 0.0 {
                acc.ln() + scale
            } else {
                f64::NEG_INFINITY
            };
        }
    }
    Ok(PointProbTable { nmax, log_p })
}

/// Anti-diagonal sums `q[N] = Σ_n p[n][N-n]` of [`point_prob_table`].
pub fn total_prob_table(spec: &ProcessSpec, nmax: usize) -> Result<TotalProbTable> {
    let table = point_prob_table(spec, nmax)?;
    Ok(totals_from_points(&table))
}

pub fn totals_from_points(table: &PointProbTable) -> TotalProbTable {
    let nmax = table.nmax();
    let log_q = (0..=nmax)
        .map(|total| log_sum_exp((0..=total).map(|n| table.log_p(n, total - n))))
        .collect();
    TotalProbTable { log_q }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Truncated univariate series product, degrees `≤ deg`.
fn series_mul(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    for (i, &x) in a.iter().enumerate().take(deg + 1) {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// `Σ_k c_k(t) u(t)^k` where `c_k(t) = Σ_l π[k][l] t^l`, by Horner's rule.
fn compose(pmf: &BivariatePmf, u: &[f64], deg: usize) -> Vec<f64> {
    let row_poly = |k: usize| {
        let mut c = vec![0.0; deg + 1];
        for (l, &p) in pmf.row(k).iter().enumerate().take(deg + 1) {
            c[l] = p;
        }
        c
    };
    let mut acc = row_poly(pmf.kmax());
    for k in (0..pmf.kmax()).rev() {
        acc = series_mul(&acc, u, deg);
        for (a, c) in acc.iter_mut().zip(row_poly(k)) {
            *a += c;
        }
    }
    acc
}

/// Independent route to `q[N]`: solve `G₁ = y g(G₁, z)` as a truncated
/// power series, compose with `g₀`, and read off total-degree coefficients.
///
/// Setting `y = z = t` first collapses each anti-diagonal into one
/// coefficient of a univariate series.
pub fn oracle_total_size(spec: &ProcessSpec, nmax: usize) -> Result<TotalProbTable> {
    oracle_total_size_with_capacity(spec, nmax, DEFAULT_CAPACITY)
}

pub fn oracle_total_size_with_capacity(
    spec: &ProcessSpec,
    nmax: usize,
    capacity: usize,
) -> Result<TotalProbTable> {
    check_capacity(nmax, capacity)?;
    let mut u = vec![0.0; nmax + 1];
    // each sweep fixes at least one more coefficient
    for _ in 0..=nmax {
        let inner = compose(&spec.offspring, &u, nmax);
        let mut next = vec![0.0; nmax + 1];
        next[1..].copy_from_slice(&inner[..nmax]);
        let done = next == u;
        u = next;
        if done {
            break;
        }
    }
    let total = compose(&spec.initial, &u, nmax);
    Ok(TotalProbTable::from_linear(&total))
}
