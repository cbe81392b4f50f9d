//! Point probabilities and survival probabilities of sesqui-type
//! Galton–Watson branching processes.
//!
//! A type-L particle has a random pair `(Y, Z)` of children: `Y` of type L
//! and `Z` of type S. Type-S particles are barren. The process starts from
//! a first generation `(Y⁰, Z⁰)`.
//!
//! `P(|X| = N)` is computed three ways: exact coefficient extraction
//! ([`exact`]), saddle-point asymptotics ([`saddle`]) and simulation
//! ([`montecarlo`]). [`survival`] and [`family`] cover survival
//! probabilities and parameterised families near criticality.

pub mod cli;
pub mod config;
pub mod error;
pub mod exact;
pub mod family;
pub mod fixtures;
pub mod montecarlo;
pub mod offspring;
pub mod saddle;
pub mod survival;
pub mod validate;

pub use error::{Error, Result};
pub use offspring::{BivariatePmf, ClassParams, MomentSummary, ProcessSpec};
