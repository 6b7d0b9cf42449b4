//! Numerical toolkit for weak sufficiency of discrete quantum statistics.
//!
//! A *statistic* is a selfadjoint operator `T = Σ λ_k e_k` on a finite
//! dimensional Hilbert space whose spectral projections `e_k` partition the
//! identity. Given a finite family of vector states `φ_θ`, the crate decides
//!
//! * whether `T` is weakly sufficient (there are real functions `Φ_θ`, a vector
//!   `χ` and unit-modulus phases `c_θ` with `c_θ φ_θ = Φ_θ(T) χ`),
//! * whether *some* weakly sufficient statistic exists and builds one,
//! * whether a minimal weakly sufficient coarse-graining of `T` exists,
//! * whether `T` is sufficient in the sense of Petz (a positive unital map into
//!   the algebra of `T` leaving every state invariant).
//!
//! Every affirmative answer carries a witness that can be checked without the
//! solver, and every solver has a brute-force counterpart in [`harness`].

pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod minimality;
pub mod petz;
pub mod phases;
pub mod spectral;
pub mod sufficiency;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Complex, HermitianMatrix};
pub use minimality::{AtomClasses, BetaMode, MinimalResult};
pub use petz::{PetzCertificate, PetzInstance, PetzOptions};
pub use phases::{Alignment, PhaseConstraint, VersionAssignment};
pub use spectral::{
    AtomProjectionTable, CoarseMap, DiscreteStatistic, SpectralFunction, StateFamily,
};
pub use sufficiency::{
    Existence, GammaTable, SufficiencyVerdict, Tolerances, Violation, WitnessFactorization,
};

/// Version string embedded in emitted certificates.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
