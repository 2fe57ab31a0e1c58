//! Regular Fredholm modules for free groups acting on their Gromov boundary.
//!
//! The free group `F_n` is the vertex set of the `2n`-valent tree and its
//! boundary is the Cantor set of infinite reduced words, carrying the
//! normalized Hausdorff measure `μ` of any canonical visual metric. The crate
//! computes, in exact rational arithmetic where possible:
//!
//! * the boundary action and pushforward measures `g_*μ` ([`boundary`]);
//! * the G-expectation, G-deviation and G-covariance of locally constant
//!   functions ([`deviation`]);
//! * ℓᵖ-summability diagnostics and dimension formulas ([`summability`]);
//! * finite truncations of `ℓ²(F_n) ⊗ L²(∂F_n, μ)` and their operator
//!   identities ([`operator`]);
//! * the Connes–Chern cyclic cocycle with certified tail bounds ([`chern`]).

pub mod boundary;
pub mod chern;
pub mod deviation;
pub mod error;
pub mod function;
pub mod group;
pub mod operator;
pub mod scalar;
pub mod summability;

pub use boundary::{BoundaryPoint, Cylinder, CylinderMeasure, Region, VisualStructure};
pub use chern::{CertifiedValue, CocycleInput};
pub use deviation::{DeviationProfile, ProfileRow};
pub use error::{Error, Result};
pub use function::LocallyConstantFunction;
pub use group::{GroupParams, Letter, ReducedWord};
pub use operator::{Truncation, TruncatedOperator};
pub use scalar::{GaussRational, Rational};
pub use summability::{SummabilityReport, Verdict};
