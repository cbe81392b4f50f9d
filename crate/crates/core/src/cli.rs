//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    load_family, load_spec, Grid, Method, PerturbRunConfig, PointProbConfig, RunConfig, SimulateConfig,
    SurvivalConfig, SweepConfig, ValidateConfig,
};
use crate::error::{Error, Result};
use crate::exact::total_prob_table;
use crate::family::{family_eval, mixture, perturbation_check, sweep, PerturbConfig};
use crate::fixtures;
use crate::montecarlo::{estimate_point_probs, simulate};
use crate::saddle::{asymp_total_prob, asymptotic_params, integral_point_prob, IntegralConfig, SaddleConfig};
use crate::survival::survival;
use crate::validate::validate_spec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sesqui", version, about = "Point and survival probabilities of sesqui-type branching processes")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Total-size probabilities q_N by the selected methods.
    PointProb(PointProbArgs),
    /// Survival probabilities.
    Survival(SurvivalArgs),
    /// Asymptotic and survival quantities along a family.
    Sweep(SweepArgs),
    /// Perturbation gaps against a mixture partner.
    Perturb(PerturbArgs),
    /// Invariant checks on the shipped fixtures or given specs.
    Validate(ValidateArgs),
    /// Monte Carlo histogram of total sizes.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PointProbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SurvivalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    family: Option<PathBuf>,
    /// lo:hi:steps
    #[arg(long)]
    grid: Option<Grid>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    family: Option<PathBuf>,
    /// Spec mixed into the family member.
    #[arg(long)]
    partner: Option<PathBuf>,
    /// Mixture weight of the partner.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    grid: Option<Grid>,
    /// Polydisk radius for the pgf distance.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Specs to check instead of the built-in fixtures.
    #[arg(long)]
    spec: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    cap: Option<u64>,
}

fn missing(flag: &str) -> Error {
    Error::Config(format!("missing --{flag}"))
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<RunConfig>> {
    let Some(path) = path else { return Ok(None) };
    let mut cfg = RunConfig::load(path)?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")));
    Ok(Some(cfg))
}

fn wrong_command(expected: &str) -> Error {
    Error::Config(format!("configuration is not for '{expected}'"))
}

/// A numerical failure that still produced output.
struct Partial(Vec<String>);

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_csv<T: Serialize>(path: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(output(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

#[derive(Serialize)]
struct PointRow {
    #[serde(rename = "N")]
    n: usize,
    q_exact: String,
    q_asymp: String,
    q_integral: String,
    q_mc: String,
    mc_ci_lo: String,
    mc_ci_hi: String,
    ratio_asymp: String,
    ratio_integral: String,
    ratio_mc: String,
}

fn point_prob(cfg: PointProbConfig) -> Result<Option<Partial>> {
    let spec = load_spec(&cfg.spec)?;
    if cfg.nmax < 1 {
        return Err(Error::Config("nmax must be at least 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    let nmax = cfg.nmax;
    let mut failures = Vec::new();
    let mut columns: [Vec<Option<f64>>; 4] = std::array::from_fn(|_| vec![None; nmax + 1]);
    let mut ci: Vec<Option<(f64, f64)>> = vec![None; nmax + 1];
    let want = |m: Method| cfg.methods.contains(&m);
    let mut fail = |op: &str, e: Error, col: &mut Vec<Option<f64>>| {
        failures.push(format!("{op}: {e}"));
        col.iter_mut().skip(1).for_each(|v| *v = Some(f64::NAN));
    };
    if want(Method::Exact) {
        match total_prob_table(&spec, nmax) {
            Ok(t) => (1..=nmax).for_each(|n| columns[0][n] = Some(t.q(n))),
            Err(e) => fail("total_prob_table", e, &mut columns[0]),
        }
    }
    if want(Method::Asymptotic) {
        match asymptotic_params(&spec, &SaddleConfig::default()) {
            Ok(p) => (1..=nmax).for_each(|n| columns[1][n] = Some(asymp_total_prob(&p, n).value)),
            Err(e) => fail("asymptotic_params", e, &mut columns[1]),
        }
    }
    if want(Method::Integral) {
        let ic = IntegralConfig::default();
        let q: Result<Vec<f64>> = (1..=nmax)
            .into_par_iter()
            .map(|total| {
                (1..=total)
                    .map(|n| integral_point_prob(&spec, n, total - n, None, &ic).map(|p| p.value))
                    .sum()
            })
            .collect();
        match q {
            Ok(q) => q.into_iter().enumerate().for_each(|(i, v)| columns[2][i + 1] = Some(v)),
            Err(e) => fail("integral_point_prob", e, &mut columns[2]),
        }
    }
    if want(Method::Mc) {
        match estimate_point_probs(&spec, cfg.samples.unwrap_or(100_000), nmax as u64, cfg.seed.unwrap_or(0)) {
            Ok((rows, _)) => {
                for r in rows.iter().skip(1) {
                    columns[3][r.n as usize] = Some(r.p_hat);
                    ci[r.n as usize] = Some((r.ci_lo, r.ci_hi));
                }
            }
            Err(e) => fail("estimate_point_probs", e, &mut columns[3]),
        }
    }
    let ratio = |v: Option<f64>, exact: Option<f64>| match (v, exact) {
        (Some(v), Some(e)) => Some(v / e),
        _ => None,
    };
    let rows: Vec<PointRow> = (1..=nmax)
        .map(|n| {
            let exact = columns[0][n];
            PointRow {
                n,
                q_exact: fmt_opt(exact),
                q_asymp: fmt_opt(columns[1][n]),
                q_integral: fmt_opt(columns[2][n]),
                q_mc: fmt_opt(columns[3][n]),
                mc_ci_lo: fmt_opt(ci[n].map(|c| c.0)),
                mc_ci_hi: fmt_opt(ci[n].map(|c| c.1)),
                ratio_asymp: fmt_opt(ratio(exact, columns[1][n])),
                ratio_integral: fmt_opt(ratio(exact, columns[2][n])),
                ratio_mc: fmt_opt(ratio(exact, columns[3][n])),
            }
        })
        .collect();
    write_csv(&cfg.out, &rows)?;
    Ok((!failures.is_empty()).then_some(Partial(failures)))
}

#[derive(Serialize)]
struct SurvivalOut {
    rho_hat: Option<f64>,
    other_roots: Vec<f64>,
    rho_single: f64,
    rho_process: f64,
    residual: f64,
}

fn survival_cmd(cfg: SurvivalConfig) -> Result<Option<Partial>> {
    let spec = load_spec(&cfg.spec)?;
    let s = match survival(&spec) {
        Ok(s) => s,
        Err(e) => return Ok(Some(Partial(vec![format!("survival: {e}")]))),
    };
    write_json(
        &cfg.out,
        &SurvivalOut {
            rho_hat: s.rho_hat,
            other_roots: s.other_roots,
            rho_single: s.rho_single,
            rho_process: s.rho_process,
            residual: s.residual,
        },
    )?;
    Ok(None)
}

#[derive(Serialize)]
struct SweepOut {
    t: f64,
    mean_y: f64,
    xi: f64,
    theta: f64,
    xhat: f64,
    rho_single: f64,
    rho_process: f64,
    error: String,
}

fn sweep_cmd(cfg: SweepConfig) -> Result<Option<Partial>> {
    let family = load_family(&cfg.family)?;
    let rows = sweep(&family, &cfg.grid.points(), &SaddleConfig::default());
    let out: Vec<SweepOut> = rows
        .into_iter()
        .map(|r| SweepOut {
            t: r.t,
            mean_y: r.mean_y,
            xi: r.xi,
            theta: r.theta,
            xhat: r.xhat,
            rho_single: r.rho_single,
            rho_process: r.rho_process,
            error: r.error.unwrap_or_default(),
        })
        .collect();
    write_csv(&cfg.out, &out)?;
    Ok(None)
}

#[derive(Serialize)]
struct PerturbOut {
    t: f64,
    eta: f64,
    xi_base: f64,
    xi_perturbed: f64,
    xi_gap: f64,
    rho_base: f64,
    rho_perturbed: f64,
    rho_gap: f64,
    bound_xi: f64,
    bound_rho: f64,
    error: String,
}

fn perturb_cmd(cfg: PerturbRunConfig) -> Result<Option<Partial>> {
    let family = load_family(&cfg.family)?;
    let partner = load_spec(&cfg.partner)?;
    if !(0.0..=1.0).contains(&cfg.u) {
        return Err(Error::Config(format!("u = {} outside [0, 1]", cfg.u)));
    }
    let pc = PerturbConfig {
        r: cfg.r.unwrap_or(2.0),
        ..PerturbConfig::default()
    };
    let mut failures = Vec::new();
    let rows: Vec<PerturbOut> = cfg
        .grid
        .points()
        .into_par_iter()
        .map(|t| {
            let report = family_eval(&family, t)
                .and_then(|base| mixture(&base, &partner, cfg.u))
                .and_then(|p| perturbation_check(&family, t, &p, &pc));
            match report {
                Ok(r) => PerturbOut {
                    t,
                    eta: r.eta,
                    xi_base: r.xi_base,
                    xi_perturbed: r.xi_perturbed,
                    xi_gap: r.xi_gap,
                    rho_base: r.rho_base,
                    rho_perturbed: r.rho_perturbed,
                    rho_gap: r.rho_gap,
                    bound_xi: r.bound_xi,
                    bound_rho: r.bound_rho,
                    error: String::new(),
                },
                Err(e) => PerturbOut {
                    t,
                    eta: f64::NAN,
                    xi_base: f64::NAN,
                    xi_perturbed: f64::NAN,
                    xi_gap: f64::NAN,
                    rho_base: f64::NAN,
                    rho_perturbed: f64::NAN,
                    rho_gap: f64::NAN,
                    bound_xi: f64::NAN,
                    bound_rho: f64::NAN,
                    error: format!("perturbation_check: {e}"),
                },
            }
        })
        .collect();
    failures.extend(rows.iter().filter(|r| !r.error.is_empty()).map(|r| format!("t={}: {}", r.t, r.error)));
    write_csv(&cfg.out, &rows)?;
    Ok((!failures.is_empty()).then_some(Partial(failures)))
}

fn validate_cmd(cfg: ValidateConfig) -> Result<Option<Partial>> {
    let targets: Vec<(String, crate::offspring::ProcessSpec)> = if cfg.specs.is_empty() {
        let mut v: Vec<(String, _)> = fixtures::oracle_fixtures()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        v.push(("poisson_critical".into(), fixtures::poisson(1.0, 1.0)));
        v.push(("binomial_supercritical".into(), fixtures::binomial_supercritical()));
        v
    } else {
        cfg.specs
            .iter()
            .map(|p| Ok((p.display().to_string(), load_spec(p)?)))
            .collect::<Result<_>>()?
    };
    let checks: Vec<_> = targets
        .par_iter()
        .flat_map_iter(|(name, spec)| validate_spec(name, spec))
        .collect();
    write_csv(&cfg.out, &checks)?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {}: {}", c.fixture, c.invariant, c.detail))
        .collect();
    Ok((!failed.is_empty()).then_some(Partial(failed)))
}

fn simulate_cmd(cfg: SimulateConfig) -> Result<Option<Partial>> {
    let spec = load_spec(&cfg.spec)?;
    let cap = cfg.cap.unwrap_or(cfg.nmax).max(cfg.nmax);
    let hist = simulate(&spec, cfg.samples, cap, cfg.seed)?;
    let rows: Vec<_> = (0..=cfg.nmax)
        .map(|n| crate::montecarlo::EstimateRow::new(n, hist.counts[n as usize], hist.samples, crate::montecarlo::Z95))
        .collect();
    write_csv(&cfg.out, &rows)?;
    let larger: u64 = hist.counts.iter().skip(cfg.nmax as usize + 1).sum();
    eprintln!(
        "{}",
        serde_json::json!({"samples": hist.samples, "above_nmax": larger, "exceeded_cap": hist.exceeded, "cap": cap})
    );
    Ok(None)
}

fn dispatch(cmd: Command) -> Result<Option<Partial>> {
    match cmd {
        Command::PointProb(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::PointProb(c)) => Some(c),
                Some(_) => return Err(wrong_command("point-prob")),
                None => None,
            };
            let cfg = PointProbConfig {
                spec: a.spec.or(base.as_ref().map(|c| c.spec.clone())).ok_or_else(|| missing("spec"))?,
                nmax: a.nmax.or(base.as_ref().map(|c| c.nmax)).ok_or_else(|| missing("nmax"))?,
                methods: a
                    .methods
                    .or(base.as_ref().map(|c| c.methods.clone()))
                    .unwrap_or_else(|| vec![Method::Exact, Method::Asymptotic]),
                samples: a.samples.or(base.as_ref().and_then(|c| c.samples)),
                seed: a.seed.or(base.as_ref().and_then(|c| c.seed)),
                out: a.common.out.or(base.and_then(|c| c.out)),
            };
            point_prob(cfg)
        }
        Command::Survival(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::Survival(c)) => Some(c),
                Some(_) => return Err(wrong_command("survival")),
                None => None,
            };
            survival_cmd(SurvivalConfig {
                spec: a.spec.or(base.as_ref().map(|c| c.spec.clone())).ok_or_else(|| missing("spec"))?,
                out: a.common.out.or(base.and_then(|c| c.out)),
            })
        }
        Command::Sweep(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::Sweep(c)) => Some(c),
                Some(_) => return Err(wrong_command("sweep")),
                None => None,
            };
            sweep_cmd(SweepConfig {
                family: a.family.or(base.as_ref().map(|c| c.family.clone())).ok_or_else(|| missing("family"))?,
                grid: a.grid.or(base.as_ref().map(|c| c.grid)).ok_or_else(|| missing("grid"))?,
                out: a.common.out.or(base.and_then(|c| c.out)),
            })
        }
        Command::Perturb(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::Perturb(c)) => Some(c),
                Some(_) => return Err(wrong_command("perturb")),
                None => None,
            };
            perturb_cmd(PerturbRunConfig {
                family: a.family.or(base.as_ref().map(|c| c.family.clone())).ok_or_else(|| missing("family"))?,
                partner: a.partner.or(base.as_ref().map(|c| c.partner.clone())).ok_or_else(|| missing("partner"))?,
                u: a.u.or(base.as_ref().map(|c| c.u)).ok_or_else(|| missing("u"))?,
                grid: a.grid.or(base.as_ref().map(|c| c.grid)).ok_or_else(|| missing("grid"))?,
                r: a.r.or(base.as_ref().and_then(|c| c.r)),
                out: a.common.out.or(base.and_then(|c| c.out)),
            })
        }
        Command::Validate(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::Validate(c)) => Some(c),
                Some(_) => return Err(wrong_command("validate")),
                None => None,
            };
            let specs = if a.spec.is_empty() {
                base.as_ref().map(|c| c.specs.clone()).unwrap_or_default()
            } else {
                a.spec
            };
            validate_cmd(ValidateConfig {
                specs,
                out: a.common.out.or(base.and_then(|c| c.out)),
            })
        }
        Command::Simulate(a) => {
            let base = match load_config(&a.common.config)? {
                Some(RunConfig::Simulate(c)) => Some(c),
                Some(_) => return Err(wrong_command("simulate")),
                None => None,
            };
            simulate_cmd(SimulateConfig {
                spec: a.spec.or(base.as_ref().map(|c| c.spec.clone())).ok_or_else(|| missing("spec"))?,
                samples: a.samples.or(base.as_ref().map(|c| c.samples)).unwrap_or(100_000),
                seed: a.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0),
                nmax: a.nmax.or(base.as_ref().map(|c| c.nmax)).unwrap_or(20),
                cap: a.cap.or(base.as_ref().and_then(|c| c.cap)),
                out: a.common.out.or(base.and_then(|c| c.out)),
            })
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(None) => EXIT_OK,
        Ok(Some(Partial(msgs))) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            EXIT_NUMERIC
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            }
        }
    }
}
