//! Numerical tools for spectral gaps of reversible Markov semigroups and
//! the `L^p` decay bounds that follow from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod format;
pub mod generator;
pub mod hermite;
pub mod semigroup;
pub mod spectral;
pub mod state_space;
pub mod verify;

pub use constants::{BoundSource, DecayBound};
pub use error::{Error, Result};
pub use generator::{build_grid_generator, build_ou_hermite, GeneratorKind, GeneratorRep};
pub use semigroup::{evolve, DecayCurve, Evolution, Quantity};
pub use spectral::{decompose, poincare_constant, rayleigh_quotient, SpectralDecomposition};
pub use state_space::{build_grid_space, Observable, ProbabilitySpace, SpaceKind};
pub use verify::{run_suite, CheckResult, CheckStatus, SuiteConfig, VerificationReport};
