//! Reference processes and families used by the tests, the CLI `validate`
//! command and the shipped JSON fixtures.

use crate::family::{FamilyKind, FamilySpec, PolyEntry};
use crate::offspring::{BivariatePmf, ProcessSpec};

/// Every particle is a leaf: `|X| = 1`.
pub fn degenerate() -> ProcessSpec {
    ProcessSpec::new(BivariatePmf::atom(0, 0), BivariatePmf::atom(1, 0))
}

/// `Y ~ Bernoulli(½)`, `Z ≡ 0`: `q_N = 2^{-N}`.
pub fn geometric() -> ProcessSpec {
    let off = BivariatePmf::from_entries(&[(0, 0, 0.5), (1, 0, 0.5)], false).expect("valid");
    ProcessSpec::new(off, BivariatePmf::atom(1, 0))
}

/// `Y ~ Bernoulli(½)`, `Z ≡ 1`: totals are even, `q_{2n} = 2^{-n}`.
pub fn parity() -> ProcessSpec {
    let off = BivariatePmf::from_entries(&[(0, 1, 0.5), (1, 1, 0.5)], false).expect("valid");
    ProcessSpec::new(off, BivariatePmf::atom(1, 0))
}

/// Truncated Poisson(`mu`) × Poisson(`nu`) offspring, one initial type-L
/// particle.
pub fn poisson(mu: f64, nu: f64) -> ProcessSpec {
    ProcessSpec::new(
        BivariatePmf::product_poisson(mu, nu, 1e-15).expect("valid"),
        BivariatePmf::atom(1, 0),
    )
}

/// Subcritical Poisson(0.95) × Poisson(1).
pub fn poisson_subcritical() -> ProcessSpec {
    poisson(0.95, 1.0)
}

/// `Y ~ Binomial(2, ¾)`, `Z ≡ 0`, one initial particle: `ρ = 8/9`.
pub fn binomial_supercritical() -> ProcessSpec {
    let off = BivariatePmf::from_entries(&[(0, 0, 0.0625), (1, 0, 0.375), (2, 0, 0.5625)], false)
        .expect("valid");
    ProcessSpec::new(off, BivariatePmf::atom(1, 0))
}

/// The four processes of the dual-oracle and simulation checks.
pub fn oracle_fixtures() -> Vec<(&'static str, ProcessSpec)> {
    vec![
        ("degenerate", degenerate()),
        ("geometric", geometric()),
        ("parity", parity()),
        ("poisson", poisson_subcritical()),
    ]
}

/// `Y_t ~ Binomial(2, t/2)` independent of `Z ~ Bernoulli(½)` on
/// `[0.5, 1.9]`, so `E Y_t = t` and `t_c = 1`.
pub fn binomial_family() -> FamilySpec {
    let y = [
        vec![1.0, -1.0, 0.25],
        vec![0.0, 1.0, -0.5],
        vec![0.0, 0.0, 0.25],
    ];
    let mut offspring = Vec::new();
    for (k, c) in y.iter().enumerate() {
        for l in 0..2 {
            offspring.push(PolyEntry::new(k, l, c.iter().map(|v| 0.5 * v).collect()));
        }
    }
    FamilySpec::new(
        (0.5, 1.9),
        FamilyKind::Polynomial {
            offspring,
            initial: vec![PolyEntry::new(1, 0, vec![1.0])],
        },
    )
    .expect("valid family")
}

/// Offspring Poisson(`t`) × Poisson(1) on `[0.5, 1.5]`, one initial
/// particle.
pub fn poisson_family() -> FamilySpec {
    FamilySpec::new(
        (0.5, 1.5),
        FamilyKind::PoissonT {
            nu: 1.0,
            tail_tol: 1e-15,
            initial: BivariatePmf::atom(1, 0),
        },
    )
    .expect("valid family")
}
