//! JSON formats for process specs, families and run configurations.
//!
//! Paths inside a run configuration are relative to the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec, PolyEntry};
use crate::offspring::{BivariatePmf, ProcessSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PmfJson {
    Entries(EntriesJson),
    Family(PoissonJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntriesJson {
    pub entries: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfFamilyName {
    ProductPoisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonJson {
    pub family: PmfFamilyName,
    pub mu: f64,
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

impl PmfJson {
    pub fn build(&self) -> Result<BivariatePmf> {
        match self {
            PmfJson::Entries(e) => BivariatePmf::from_entries(&e.entries, e.normalize.unwrap_or(false)),
            PmfJson::Family(p) => BivariatePmf::product_poisson(p.mu, p.nu, p.tail_tol.unwrap_or(1e-15)),
        }
    }

    pub fn from_pmf(pmf: &BivariatePmf) -> Self {
        PmfJson::Entries(EntriesJson {
            entries: pmf.entries().collect(),
            normalize: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecJson {
    pub offspring: PmfJson,
    pub initial: PmfJson,
}

impl SpecJson {
    pub fn build(&self) -> Result<ProcessSpec> {
        Ok(ProcessSpec::new(self.offspring.build()?, self.initial.build()?))
    }

    pub fn from_spec(spec: &ProcessSpec) -> Self {
        Self {
            offspring: PmfJson::from_pmf(&spec.offspring),
            initial: PmfJson::from_pmf(&spec.initial),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyJson {
    Polynomial(PolynomialFamilyJson),
    Builtin(BuiltinFamilyJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialFamilyJson {
    pub interval: [f64; 2],
    pub offspring: Vec<(usize, usize, Vec<f64>)>,
    pub initial: Vec<(usize, usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    PoissonT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinFamilyJson {
    pub builtin: BuiltinName,
    pub interval: [f64; 2],
    pub nu: f64,
    pub initial: PmfJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

fn poly(entries: &[(usize, usize, Vec<f64>)]) -> Vec<PolyEntry> {
    entries
        .iter()
        .map(|(k, l, c)| PolyEntry::new(*k, *l, c.clone()))
        .collect()
}

impl FamilyJson {
    pub fn build(&self) -> Result<FamilySpec> {
        match self {
            FamilyJson::Polynomial(p) => FamilySpec::new(
                (p.interval[0], p.interval[1]),
                FamilyKind::Polynomial {
                    offspring: poly(&p.offspring),
                    initial: poly(&p.initial),
                },
            ),
            FamilyJson::Builtin(b) => FamilySpec::new(
                (b.interval[0], b.interval[1]),
                FamilyKind::PoissonT {
                    nu: b.nu,
                    tail_tol: b.tail_tol.unwrap_or(1e-15),
                    initial: b.initial.build()?,
                },
            ),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_spec(path: &Path) -> Result<ProcessSpec> {
    parse::<SpecJson>(path)?.build()
}

/// Parses a process spec from JSON text.
pub fn spec_from_json(text: &str) -> Result<ProcessSpec> {
    serde_json::from_str::<SpecJson>(text)
        .map_err(|e| Error::Config(e.to_string()))?
        .build()
}

pub fn load_family(path: &Path) -> Result<FamilySpec> {
    parse::<FamilyJson>(path)?.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Asymptotic,
    Integral,
    Mc,
}

/// `lo:hi:steps`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.lo];
        }
        (0..self.steps)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("grid '{s}' is not lo:hi:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].parse().map_err(|_| bad())?;
        let hi = parts[1].parse().map_err(|_| bad())?;
        let steps = parts[2].parse().map_err(|_| bad())?;
        Ok(Grid { lo, hi, steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointProbConfig {
    pub spec: PathBuf,
    pub nmax: usize,
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalConfig {
    pub spec: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: PathBuf,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Perturbed process at each grid `t`: `(1-u)·family(t) + u·partner`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRunConfig {
    pub family: PathBuf,
    pub partner: PathBuf,
    pub u: f64,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub specs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub spec: PathBuf,
    pub samples: u64,
    pub seed: u64,
    pub nmax: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    PointProb(PointProbConfig),
    Survival(SurvivalConfig),
    Sweep(SweepConfig),
    Perturb(PerturbRunConfig),
    Validate(ValidateConfig),
    Simulate(SimulateConfig),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialise")
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        match self {
            RunConfig::PointProb(c) => {
                fix(&mut c.spec);
                fix_opt(&mut c.out);
            }
            RunConfig::Survival(c) => {
                fix(&mut c.spec);
                fix_opt(&mut c.out);
            }
            RunConfig::Sweep(c) => {
                fix(&mut c.family);
                fix_opt(&mut c.out);
            }
            RunConfig::Perturb(c) => {
                fix(&mut c.family);
                fix(&mut c.partner);
                fix_opt(&mut c.out);
            }
            RunConfig::Validate(c) => {
                c.specs.iter_mut().for_each(fix);
                fix_opt(&mut c.out);
            }
            RunConfig::Simulate(c) => {
                fix(&mut c.spec);
                fix_opt(&mut c.out);
            }
        }
    }
}
