//! Saddle-point asymptotics.
//!
//! For a ratio `r = m/n` the saddle `(α, β)` solves `Dφ(α, β) = (1, r)`,
//! and `p[n][m] ≈ n⁻² e^{nψ(α,β)} f̃₀(α,β) / (2π √det D²φ)`. Along the
//! constraint curve `x = n/N` the exponent becomes `NΨ(x)`, whose maximiser
//! `x̂` gives the decay rate `ξ = -Ψ(x̂)` and prefactor
//! `θ = √(2π/|Ψ''(x̂)|) Φ(x̂)` of `q_N ≈ θ N^{-3/2} e^{-ξN}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::offspring::{
    check_k0, check_k1, log_mgf_derivs, moments, tilde_f0, tilted, torus_grid, BivariatePmf,
    ClassParams, ProcessSpec,
};

/// Solver and search settings shared by the saddle-point routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleConfig {
    /// Saddle points must satisfy `|α|, |β| ≤ box_radius`.
    pub box_radius: f64,
    /// Half-width of the `x̂` search window around `x₀`.
    pub search_radius: f64,
    /// Largest admissible `|E Y - 1|` for [`asymptotic_params`].
    pub mean_window: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Base step of the Richardson-extrapolated differences of `Ψ`.
    pub fd_step: f64,
    pub class: ClassParams,
    /// Reject inputs failing the class checks.
    pub enforce_class: bool,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        let class = ClassParams::default();
        Self {
            box_radius: class.box_radius(),
            search_radius: 0.2,
            mean_window: 0.25,
            max_iter: 50,
            tol: 1e-10,
            fd_step: 1e-4,
            class,
            enforce_class: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint {
    pub alpha: f64,
    pub beta: f64,
    /// Sup-norm of the equation residual at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticParams {
    pub x0: f64,
    pub xhat: f64,
    pub xi: f64,
    pub theta: f64,
    /// `Ψ''(x̂)`.
    pub psi_pp: f64,
    /// `Φ(x̂)`.
    pub phi_at_xhat: f64,
}

/// A probability with its logarithm, which stays meaningful after the
/// linear value underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb {
    pub value: f64,
    pub log_value: f64,
}

impl LogProb {
    pub fn from_log(log_value: f64) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSum {
    pub a: f64,
    pub y: f64,
    pub j: u32,
    pub value: f64,
}

fn solve2(h: [[f64; 2]; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (h[1][1] * rhs[0] - h[0][1] * rhs[1]) / det,
        (h[0][0] * rhs[1] - h[1][0] * rhs[0]) / det,
    ])
}

fn sup(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton from the origin for a 2-D system with analytic Jacobian.
///
/// Steps are halved until the residual decreases and the iterate stays in
/// the box. Three consecutive steps shortened by the box wall count as
/// leaving the domain. Once the tolerance is met a couple of extra steps are
/// taken while they still reduce the residual.
fn damped_newton(
    op: &'static str,
    system: impl Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2]),
    cfg: &SaddleConfig,
) -> Result<SaddlePoint> {
    let (mut a, mut b) = (0.0, 0.0);
    let (mut res, mut jac) = system(a, b);
    let mut norm = sup(res);
    let mut polish = 0;
    let mut wall_steps = 0;
    for iter in 0..=cfg.max_iter {
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                op,
                iterations: iter,
            });
        }
        if norm <= cfg.tol {
            if polish == 2 || norm == 0.0 {
                return Ok(SaddlePoint {
                    alpha: a,
                    beta: b,
                    residual: norm,
                    iterations: iter,
                });
            }
            polish += 1;
        }
        let Some(step) = solve2(jac, [-res[0], -res[1]]) else {
            return Err(Error::SingularHessian { op, det: 0.0 });
        };
        let mut lambda = 1.0;
        let mut hit_wall = false;
        let accepted = loop {
            let (na, nb) = (a + lambda * step[0], b + lambda * step[1]);
            if na.abs() > cfg.box_radius || nb.abs() > cfg.box_radius {
                hit_wall = true;
            } else {
                let (nres, njac) = system(na, nb);
                let nnorm = sup(nres);
                if nnorm < norm {
                    break Some((na, nb, nres, njac, nnorm));
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                break None;
            }
        };
        wall_steps = if hit_wall { wall_steps + 1 } else { 0 };
        match accepted {
            _ if wall_steps >= 3 && norm > cfg.tol => return Err(Error::LeftDomain { op }),
            Some((na, nb, nres, njac, nnorm)) => {
                a = na;
                b = nb;
                res = nres;
                jac = njac;
                norm = nnorm;
            }
            None if norm <= cfg.tol => {
                return Ok(SaddlePoint {
                    alpha: a,
                    beta: b,
                    residual: norm,
                    iterations: iter,
                });
            }
            None if hit_wall => return Err(Error::LeftDomain { op }),
            None => {
                return Err(Error::NoConvergence {
                    op,
                    iterations: iter,
                })
            }
        }
    }
    Err(Error::NoConvergence {
        op,
        iterations: cfg.max_iter,
    })
}

/// Solves `Dφ(α, β) = target` by damped Newton from `(0, 0)`.
pub fn solve_saddle(offspring: &BivariatePmf, target: [f64; 2], cfg: &SaddleConfig) -> Result<SaddlePoint> {
    if !(target[0] > 0.0 && target[1] > 0.0) || !target.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "saddle target must be a positive pair, got {target:?}"
        )));
    }
    damped_newton(
        "solve_saddle",
        |a, b| {
            let d = log_mgf_derivs(offspring, a, b);
            ([d.grad[0] - target[0], d.grad[1] - target[1]], d.hess)
        },
        cfg,
    )
}

/// `ψ(α, β) = φ - α D₁φ - β D₂φ`.
pub fn psi_small(offspring: &BivariatePmf, alpha: f64, beta: f64) -> f64 {
    let d = log_mgf_derivs(offspring, alpha, beta);
    d.phi - alpha * d.grad[0] - beta * d.grad[1]
}

/// `x₀ = 1 / (1 + E Z)`.
pub fn x0(offspring: &BivariatePmf) -> f64 {
    1.0 / (1.0 + moments(offspring).mean_z)
}

/// `h(x)`: the point where `F(α, β) = (E Y - 1, x - x₀)` with
/// `F = (E Y - D₁φ, 1/(1 + D₂φ) - x₀)`.
pub fn h_of_x(offspring: &BivariatePmf, x: f64, cfg: &SaddleConfig) -> Result<SaddlePoint> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} outside (0, 1)")));
    }
    let mom = moments(offspring);
    let x0 = 1.0 / (1.0 + mom.mean_z);
    if (x - x0).abs() > cfg.search_radius + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "|x - x0| = {} exceeds search radius {}",
            (x - x0).abs(),
            cfg.search_radius
        )));
    }
    let target = [mom.mean_y - 1.0, x - x0];
    damped_newton(
        "h_of_x",
        |a, b| {
            let d = log_mgf_derivs(offspring, a, b);
            let s = 1.0 + d.grad[1];
            let f = [mom.mean_y - d.grad[0], 1.0 / s - x0];
            let c = -1.0 / (s * s);
            let jac = [
                [-d.hess[0][0], -d.hess[0][1]],
                [c * d.hess[1][0], c * d.hess[1][1]],
            ];
            ([f[0] - target[0], f[1] - target[1]], jac)
        },
        cfg,
    )
}

/// `Ψ(x) = x ψ(h(x))`.
pub fn capital_psi(offspring: &BivariatePmf, x: f64, cfg: &SaddleConfig) -> Result<f64> {
    let sp = h_of_x(offspring, x, cfg)?;
    Ok(psi_at(offspring, x, &sp))
}

/// `x ψ(α, β)` written as `xφ - xα - (1-x)β`, which agrees with it at the
/// saddle and is stationary in `(α, β)`, so solver residuals enter only
/// quadratically.
fn psi_at(offspring: &BivariatePmf, x: f64, sp: &SaddlePoint) -> f64 {
    let d = log_mgf_derivs(offspring, sp.alpha, sp.beta);
    x * d.phi - x * sp.alpha - (1.0 - x) * sp.beta
}

/// `Φ(x) = (2π)⁻¹ x⁻² f̃₀(h(x)) det(D²φ(h(x)))^{-1/2}`.
pub fn capital_phi(spec: &ProcessSpec, x: f64, cfg: &SaddleConfig) -> Result<f64> {
    let sp = h_of_x(&spec.offspring, x, cfg)?;
    let d = log_mgf_derivs(&spec.offspring, sp.alpha, sp.beta);
    let det = d.det();
    if !(det > 0.0) {
        return Err(Error::SingularHessian {
            op: "capital_phi",
            det,
        });
    }
    Ok(tilde_f0(&spec.initial, sp.alpha, sp.beta) / (2.0 * PI * x * x * det.sqrt()))
}

fn richardson_first(f: &impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn richardson_second(f: &impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    let center = f(x)?;
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - 2.0 * center + f(x - h)?) / (h * h)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `Ψ'(x)` by Richardson-extrapolated central differences.
pub fn capital_psi_prime(offspring: &BivariatePmf, x: f64, cfg: &SaddleConfig) -> Result<f64> {
    let wide = SaddleConfig {
        search_radius: cfg.search_radius + 2.0 * cfg.fd_step,
        ..*cfg
    };
    richardson_first(&|x| capital_psi(offspring, x, &wide), x, cfg.fd_step)
}

/// `Ψ''(x)` by Richardson-extrapolated central differences.
pub fn capital_psi_second(offspring: &BivariatePmf, x: f64, cfg: &SaddleConfig) -> Result<f64> {
    let wide = SaddleConfig {
        search_radius: cfg.search_radius + 2.0 * cfg.fd_step,
        ..*cfg
    };
    richardson_second(&|x| capital_psi(offspring, x, &wide), x, cfg.fd_step)
}

/// Maximiser `x̂` of `Ψ` near `x₀`: a sign change of `Ψ'` is bracketed on a
/// grid, then refined by Newton steps safeguarded with bisection.
pub fn find_xhat(offspring: &BivariatePmf, cfg: &SaddleConfig) -> Result<f64> {
    const GRID: usize = 40;
    const EDGE: f64 = 1e-3;
    let x0 = x0(offspring);
    let dpsi = |x: f64| capital_psi_prime(offspring, x, cfg);

    let at_x0 = dpsi(x0)?;
    if at_x0.abs() <= 1e-9 {
        return Ok(x0);
    }
    // Ψ is concave near x₀, so Ψ' > 0 left of x̂; walk away from x₀ in the
    // direction of ascent until Ψ' changes sign
    let dir = at_x0.signum();
    let lo_lim = (x0 - cfg.search_radius).max(EDGE);
    let hi_lim = (x0 + cfg.search_radius).min(1.0 - EDGE);
    let reach = if dir > 0.0 { hi_lim - x0 } else { x0 - lo_lim };
    let mut prev = (x0, at_x0);
    let mut bracket = None;
    for i in 1..=GRID {
        let x = x0 + dir * reach * i as f64 / GRID as f64;
        let Ok(v) = dpsi(x) else { break };
        if v == 0.0 {
            return Ok(x);
        }
        if v.signum() != prev.1.signum() {
            bracket = Some((prev, (x, v)));
            break;
        }
        prev = (x, v);
    }
    let Some((p, q)) = bracket else {
        return Err(Error::NoSignChange { op: "find_xhat" });
    };
    let (mut lo, mut hi) = if p.0 < q.0 { (p, q) } else { (q, p) };
    let mut x = lo.0 - lo.1 * (hi.0 - lo.0) / (hi.1 - lo.1);
    for _ in 0..100 {
        let v = dpsi(x)?;
        if v.abs() <= 1e-9 {
            return Ok(x);
        }
        if v.signum() == lo.1.signum() {
            lo = (x, v);
        } else {
            hi = (x, v);
        }
        let curv = capital_psi_second(offspring, x, cfg)?;
        let newton = x - v / curv;
        x = if curv < 0.0 && newton > lo.0 && newton < hi.0 {
            newton
        } else {
            0.5 * (lo.0 + hi.0)
        };
        if hi.0 - lo.0 < 1e-15 {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        op: "find_xhat",
        iterations: 100,
    })
}

/// Checks the moment and support conditions required by
/// [`asymptotic_params`].
pub fn check_class(spec: &ProcessSpec, cfg: &SaddleConfig) -> Result<()> {
    cfg.class.validate()?;
    let k0 = check_k0(&spec.offspring, &cfg.class);
    if !k0.passes {
        return Err(Error::ClassViolation(format!(
            "offspring: E R^(Y+Z) = {} (M = {}), E Y = {} (delta = {})",
            k0.moment, cfg.class.m, k0.mean_y, cfg.class.delta
        )));
    }
    let k1 = check_k1(&spec.offspring, &cfg.class);
    if !k1.passes {
        return Err(Error::ClassViolation(format!(
            "offspring support entries {:?} below delta = {}",
            k1.entries, cfg.class.delta
        )));
    }
    let mean_z = moments(&spec.offspring).mean_z;
    if mean_z < cfg.class.delta {
        return Err(Error::ClassViolation(format!("E Z = {mean_z} below delta")));
    }
    let init = check_k0(&spec.initial, &cfg.class);
    if !init.passes {
        return Err(Error::ClassViolation(format!(
            "initial: E R^(Y0+Z0) = {}, E Y0 = {}",
            init.moment, init.mean_y
        )));
    }
    let gap = (k0.mean_y - 1.0).abs();
    if gap > cfg.mean_window {
        return Err(Error::ClassViolation(format!(
            "|E Y - 1| = {gap} outside window {}",
            cfg.mean_window
        )));
    }
    Ok(())
}

/// `x₀, x̂, ξ, θ, Ψ''(x̂), Φ(x̂)` for one process.
pub fn asymptotic_params(spec: &ProcessSpec, cfg: &SaddleConfig) -> Result<AsymptoticParams> {
    if cfg.enforce_class {
        check_class(spec, cfg)?;
    }
    let off = &spec.offspring;
    let x0 = x0(off);
    let xhat = find_xhat(off, cfg)?;
    let sp = h_of_x(off, xhat, cfg)?;
    let mut xi = -psi_at(off, xhat, &sp);
    if xi.abs() <= 1e-12 {
        xi = 0.0;
    }
    let psi_pp = capital_psi_second(off, xhat, cfg)?;
    if !(psi_pp < 0.0) {
        return Err(Error::SingularHessian {
            op: "asymptotic_params",
            det: psi_pp,
        });
    }
    let phi_at_xhat = capital_phi(spec, xhat, cfg)?;
    let theta = (2.0 * PI / psi_pp.abs()).sqrt() * phi_at_xhat;
    Ok(AsymptoticParams {
        x0,
        xhat,
        xi,
        theta,
        psi_pp,
        phi_at_xhat,
    })
}

/// Leading-order saddle-point estimate of `p[n][m]`.
pub fn asymp_point_prob(spec: &ProcessSpec, n: usize, m: usize, cfg: &SaddleConfig) -> Result<LogProb> {
    if n < 1 {
        return Err(Error::InvalidIndex("n must be at least 1".into()));
    }
    let sp = solve_saddle(&spec.offspring, [1.0, m as f64 / n as f64], cfg)?;
    let d = log_mgf_derivs(&spec.offspring, sp.alpha, sp.beta);
    let det = d.det();
    if !(det > 0.0) {
        return Err(Error::SingularHessian {
            op: "asymp_point_prob",
            det,
        });
    }
    let psi = d.phi - sp.alpha * d.grad[0] - sp.beta * d.grad[1];
    let nf = n as f64;
    let log_value = -2.0 * nf.ln() + nf * psi + tilde_f0(&spec.initial, sp.alpha, sp.beta).ln()
        - (2.0 * PI).ln()
        - 0.5 * det.ln();
    Ok(LogProb::from_log(log_value))
}

/// `θ N^{-3/2} e^{-Nξ}`.
pub fn asymp_total_prob(params: &AsymptoticParams, n: usize) -> LogProb {
    let nf = n as f64;
    LogProb::from_log(params.theta.ln() - 1.5 * nf.ln() - nf * params.xi)
}

/// Settings for [`integral_point_prob`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralConfig {
    pub rel_tol: f64,
    pub min_grid: usize,
    pub max_grid: usize,
    /// Bound on `|α|, |β|` for the internally chosen radii.
    pub radius_bound: f64,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            min_grid: 16,
            max_grid: 1024,
            radius_bound: 40.0,
        }
    }
}

/// Radii for the contour integral of `p[n][m]`: the minimiser of
/// `n φ + log f̃₀ - nα - mβ`, clamped to the configured bound.
pub fn contour_radii(spec: &ProcessSpec, n: usize, m: usize, bound: f64) -> (f64, f64) {
    let nf = n as f64;
    let mf = m as f64;
    let eval = |a: f64, b: f64| {
        let d = log_mgf_derivs(&spec.offspring, a, b);
        let t = tilted(&spec.initial, a, b, |k| k as f64).expect("initial law has type-L mass");
        let value = nf * d.phi + t.log_mass - nf * a - mf * b;
        let grad = [
            nf * d.grad[0] + t.mean[0] - nf,
            nf * d.grad[1] + t.mean[1] - mf,
        ];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = nf * d.hess[i][j] + t.cov[i][j];
            }
        }
        (value, grad, hess)
    };
    let clamp = |v: f64| v.clamp(-bound, bound);
    let (mut a, mut b) = (0.0, 0.0);
    let (mut val, mut grad, mut hess) = eval(a, b);
    for _ in 0..200 {
        if sup(grad) <= 1e-12 * (nf + mf) {
            break;
        }
        let reg = 1e-12 * (hess[0][0] + hess[1][1]).max(1e-300);
        hess[0][0] += reg;
        hess[1][1] += reg;
        let step = solve2(hess, [-grad[0], -grad[1]]).unwrap_or([-grad[0], -grad[1]]);
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-12 {
            let (na, nb) = (clamp(a + lambda * step[0]), clamp(b + lambda * step[1]));
            let (nv, ng, nh) = eval(na, nb);
            if nv < val {
                a = na;
                b = nb;
                val = nv;
                grad = ng;
                hess = nh;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

fn trapezoid(
    spec: &ProcessSpec,
    n: usize,
    m: usize,
    alpha: f64,
    beta: f64,
    size: usize,
    planner: &mut FftPlanner<f64>,
) -> LogSigned {
    let (f, s) = torus_grid(&spec.offspring, alpha, beta, size, |_| 1.0, planner)
        .expect("offspring law has positive mass");
    let (f0, s0) = torus_grid(&spec.initial, alpha, beta, size, |k| k as f64, planner)
        .expect("initial law has type-L mass");
    let peak = f[0].re;
    let roots: Vec<Complex64> = (0..size)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / size as f64))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..size {
        for l in 0..size {
            let idx = j * size + l;
            let phase = roots[(n % size * j + m % size * l) % size];
            acc += f0[idx] * (f[idx] / peak).powu(n as u32) * phase;
        }
    }
    let value = acc.re / (size * size) as f64;
    let log_scale = n as f64 * (s + peak.ln()) + s0 - n as f64 * alpha - m as f64 * beta
        - (n as f64).ln();
    LogSigned { value, log_scale }
}

/// `value · e^{log_scale}`.
#[derive(Debug, Clone, Copy)]
struct LogSigned {
    value: f64,
    log_scale: f64,
}

/// `p[n][m]` from the contour integral over `|y| = e^α`, `|z| = e^β`,
/// evaluated by the tensor-product trapezoid rule with grid doubling.
///
/// With `radii = None` the radii come from [`contour_radii`].
pub fn integral_point_prob(
    spec: &ProcessSpec,
    n: usize,
    m: usize,
    radii: Option<(f64, f64)>,
    cfg: &IntegralConfig,
) -> Result<LogProb> {
    if n < 1 {
        return Err(Error::InvalidIndex("n must be at least 1".into()));
    }
    let k0max = spec.initial.entries().filter(|e| e.0 >= 1).map(|e| e.0).max();
    let Some(k0max) = k0max else {
        return Ok(LogProb::from_log(f64::NEG_INFINITY));
    };
    let off = &spec.offspring;
    if n > n * off.kmax() + k0max || m > n * off.lmax() + spec.initial.lmax() {
        return Ok(LogProb::from_log(f64::NEG_INFINITY));
    }
    let (alpha, beta) = radii.unwrap_or_else(|| contour_radii(spec, n, m, cfg.radius_bound));
    let mut planner = FftPlanner::new();
    let mut size = cfg.min_grid.next_power_of_two();
    let mut prev = trapezoid(spec, n, m, alpha, beta, size, &mut planner);
    while size < cfg.max_grid {
        size *= 2;
        let cur = trapezoid(spec, n, m, alpha, beta, size, &mut planner);
        let prev_value = prev.value * (prev.log_scale - cur.log_scale).exp();
        if (cur.value - prev_value).abs() <= cfg.rel_tol * cur.value.abs() {
            if cur.value <= 0.0 {
                return Ok(LogProb::from_log(f64::NEG_INFINITY));
            }
            return Ok(LogProb::from_log(cur.value.ln() + cur.log_scale));
        }
        prev = cur;
    }
    Err(Error::NoConvergence {
        op: "integral_point_prob",
        iterations: size,
    })
}

/// `S_j(a, y) = Σ_{n∈ℤ} (n - y)^j e^{-a(n-y)²}` by direct summation.
pub fn theta_sum(a: f64, y: f64, j: u32) -> Result<ThetaSum> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} outside (0, 1]")));
    }
    if j > 6 || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("need j <= 6 and finite y (j={j}, y={y})")));
    }
    let center = y.round();
    let term = |n: f64| {
        let d = n - y;
        d.powi(j as i32) * (-a * d * d).exp()
    };
    let mut value = term(center);
    // past the peak of d^j e^{-a d²} the terms only shrink
    let peak = (j as f64 / (2.0 * a)).sqrt();
    let mut k = 1.0;
    loop {
        let pair = term(center + k) + term(center - k);
        value += pair;
        let gauss = (-a * (k - 1.0) * (k - 1.0)).exp();
        if k - 1.0 > peak && gauss * (k + 1.0).powi(j as i32) < 1e-300 {
            break;
        }
        k += 1.0;
    }
    Ok(ThetaSum { a, y, j, value })
}

/// `(x, Ψ(x), Φ(x))` on a grid, skipping points the solver cannot reach.
pub fn psi_profile(spec: &ProcessSpec, xs: &[f64], cfg: &SaddleConfig) -> Vec<(f64, Result<(f64, f64)>)> {
    xs.iter()
        .map(|&x| {
            let v = capital_psi(&spec.offspring, x, cfg)
                .and_then(|psi| capital_phi(spec, x, cfg).map(|phi| (psi, phi)));
            (x, v)
        })
        .collect()
}
