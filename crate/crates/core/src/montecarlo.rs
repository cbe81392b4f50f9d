//! Direct simulation of the branching process.
//!
//! Every sample draws from its own ChaCha stream seeded from
//! `(master_seed, sample index)`, so results do not depend on how samples
//! are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::{BivariatePmf, ProcessSpec};

pub const Z95: f64 = 1.959963984540054;
pub const Z99: f64 = 2.5758293035489004;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimOutcome {
    Finite(u64),
    /// More than `cap` particles were born.
    Exceeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub count: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl EstimateRow {
    pub fn new(n: u64, count: u64, samples: u64, z: f64) -> Self {
        let (ci_lo, ci_hi) = wilson(count, samples, z);
        Self {
            n,
            count,
            p_hat: count as f64 / samples as f64,
            ci_lo,
            ci_hi,
        }
    }
}

/// Wilson score interval for `count` successes in `samples` trials.
pub fn wilson(count: u64, samples: u64, z: f64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if count == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if count == samples { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

/// Seed of sample `index` under `master`.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler over the flattened `(k, l)` table.
#[derive(Debug, Clone)]
struct TableSampler {
    cdf: Vec<f64>,
    pairs: Vec<(u64, u64)>,
}

impl TableSampler {
    fn new(pmf: &BivariatePmf) -> Self {
        let mut cdf = Vec::new();
        let mut pairs = Vec::new();
        let mut acc = 0.0;
        for (k, l, p) in pmf.entries() {
            acc += p;
            cdf.push(acc);
            pairs.push((k as u64, l as u64));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { cdf, pairs }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (u64, u64) {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.pairs.len() - 1);
        self.pairs[i]
    }
}

#[derive(Debug, Clone)]
struct Simulator {
    offspring: TableSampler,
    initial: TableSampler,
}

impl Simulator {
    fn new(spec: &ProcessSpec) -> Self {
        Self {
            offspring: TableSampler::new(&spec.offspring),
            initial: TableSampler::new(&spec.initial),
        }
    }

    fn run(&self, seed: u64, cap: u64) -> SimOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y0, z0) = self.initial.draw(&mut rng);
        let mut total = y0 + z0;
        let mut pending = y0;
        if total > cap {
            return SimOutcome::Exceeded(cap);
        }
        while pending > 0 {
            let (y, z) = self.offspring.draw(&mut rng);
            pending = pending - 1 + y;
            total += y + z;
            if total > cap {
                return SimOutcome::Exceeded(cap);
            }
        }
        SimOutcome::Finite(total)
    }
}

fn check_cap(cap: u64) -> Result<()> {
    if cap < 1 {
        return Err(Error::InvalidParameter("cap must be at least 1".into()));
    }
    Ok(())
}

/// Total progeny of one realisation, or `Exceeded` once more than `cap`
/// particles have been born.
pub fn sample_total(spec: &ProcessSpec, seed: u64, cap: u64) -> Result<SimOutcome> {
    check_cap(cap)?;
    Ok(Simulator::new(spec).run(seed, cap))
}

/// Histogram of outcomes: `counts[n]` for finite totals `n ≤ cap` and the
/// number of capped runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub exceeded: u64,
    pub samples: u64,
}

/// Runs `samples` realisations in parallel chunks.
pub fn simulate(spec: &ProcessSpec, samples: u64, cap: u64, master_seed: u64) -> Result<Histogram> {
    check_cap(cap)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let sim = Simulator::new(spec);
    let width = usize::try_from(cap).ok().filter(|&c| c < 1 << 28).ok_or(Error::CapacityExceeded {
        requested: cap as usize,
        limit: 1 << 28,
    })? + 1;
    let chunks = samples.div_ceil(CHUNK as u64);
    let parts: Vec<(Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; width];
            let mut exceeded = 0;
            let end = ((c + 1) * CHUNK as u64).min(samples);
            for i in c * CHUNK as u64..end {
                match sim.run(sample_seed(master_seed, i), cap) {
                    SimOutcome::Finite(n) => counts[n as usize] += 1,
                    SimOutcome::Exceeded(_) => exceeded += 1,
                }
            }
            (counts, exceeded)
        })
        .collect();
    let mut counts = vec![0u64; width];
    let mut exceeded = 0;
    for (part, e) in parts {
        counts.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        exceeded += e;
    }
    Ok(Histogram {
        counts,
        exceeded,
        samples,
    })
}

/// Rows `N = 0..=nmax` with 95% Wilson intervals. Runs larger than `nmax`
/// are counted in [`Histogram::exceeded`].
pub fn estimate_point_probs(
    spec: &ProcessSpec,
    samples: u64,
    nmax: u64,
    master_seed: u64,
) -> Result<(Vec<EstimateRow>, Histogram)> {
    let hist = simulate(spec, samples, nmax.max(1), master_seed)?;
    let rows = (0..=nmax)
        .map(|n| EstimateRow::new(n, hist.counts[n as usize], samples, Z95))
        .collect();
    Ok((rows, hist))
}

/// Survival estimated as the fraction of runs exceeding `cap` and `4·cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub cap: EstimateRow,
    pub cap4: EstimateRow,
}

/// Fraction of runs reaching more than `cap` (and `4·cap`) particles.
///
/// Large finite trees count as survivors, so both values over-estimate
/// survival, the `4·cap` one by less.
pub fn estimate_survival(spec: &ProcessSpec, samples: u64, cap: u64, master_seed: u64) -> Result<SurvivalEstimate> {
    if cap < 1000 {
        return Err(Error::InvalidParameter("survival cap must be at least 1000".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let sim = Simulator::new(spec);
    let chunks = samples.div_ceil(CHUNK as u64);
    let (small, large) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK as u64).min(samples);
            let mut hits = (0u64, 0u64);
            for i in c * CHUNK as u64..end {
                match sim.run(sample_seed(master_seed, i), 4 * cap) {
                    SimOutcome::Exceeded(_) => {
                        hits.0 += 1;
                        hits.1 += 1;
                    }
                    SimOutcome::Finite(n) if n > cap => hits.0 += 1,
                    SimOutcome::Finite(_) => {}
                }
            }
            hits
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(SurvivalEstimate {
        cap: EstimateRow::new(cap, small, samples, Z95),
        cap4: EstimateRow::new(4 * cap, large, samples, Z95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric() -> ProcessSpec {
        ProcessSpec::new(
            BivariatePmf::from_entries(&[(0, 0, 0.5), (1, 0, 0.5)], false).unwrap(),
            BivariatePmf::atom(1, 0),
        )
    }

    #[test]
    fn trivial_outcomes() {
        let leaf = ProcessSpec::new(BivariatePmf::atom(0, 0), BivariatePmf::atom(1, 0));
        for seed in 0..50 {
            assert_eq!(sample_total(&leaf, seed, 10).unwrap(), SimOutcome::Finite(1));
        }
        let empty = ProcessSpec::new(BivariatePmf::atom(1, 0), BivariatePmf::atom(0, 0));
        assert_eq!(sample_total(&empty, 3, 10).unwrap(), SimOutcome::Finite(0));
        let forever = ProcessSpec::new(BivariatePmf::atom(1, 1), BivariatePmf::atom(1, 0));
        assert_eq!(sample_total(&forever, 3, 10).unwrap(), SimOutcome::Exceeded(10));
        assert!(sample_total(&leaf, 0, 0).is_err());
    }

    #[test]
    fn geometric_mean_total() {
        let samples = 1_000_000u64;
        let hist = simulate(&geometric(), samples, 200, 7).unwrap();
        assert_eq!(hist.exceeded, 0);
        let sum: u64 = hist.counts.iter().enumerate().map(|(n, c)| n as u64 * c).sum();
        let mean = sum as f64 / samples as f64;
        let sigma = (2.0f64 / samples as f64).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * sigma, "{mean}");
    }

    #[test]
    fn rows_partition_and_intervals() {
        let (rows, hist) = estimate_point_probs(&geometric(), 20_000, 20, 1).unwrap();
        let counted: u64 = rows.iter().map(|r| r.count).sum();
        assert_eq!(counted + hist.exceeded, 20_000);
        for r in &rows {
            assert!(0.0 <= r.ci_lo && r.ci_lo <= r.p_hat && r.p_hat <= r.ci_hi && r.ci_hi <= 1.0);
        }
    }

    #[test]
    fn wilson_edge_cases() {
        assert_eq!(wilson(0, 100, Z95).0, 0.0);
        assert_eq!(wilson(100, 100, Z95).1, 1.0);
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = geometric();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate(&spec, 30_000, 50, 99).unwrap());
        let b = four.install(|| simulate(&spec, 30_000, 50, 99).unwrap());
        assert_eq!(a, b);
        let c = simulate(&spec, 30_000, 50, 100).unwrap();
        assert_ne!(a, c);
    }
}
