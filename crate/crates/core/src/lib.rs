//! Nonadiabatic transition matrices for finite-dimensional self-adjoint
//! operator pencils `(K(x) + √ħ B(x)) Ψ = −iħ Γ Ψ'` whose eigenvalue branches
//! cross linearly at a single point.
//!
//! The crate is organised along the computation:
//!
//! * [`pencil`]: the generalized eigenproblem `Kφ = βΓφ`, smooth branches, matrix elements.
//! * [`degeneracy`]: crossing location and the scalar parameters `Q, b, p, ν, σ, θ_a, w`.
//! * [`pcf`]: parabolic cylinder functions `D_ν(z)` and complex log-gamma.
//! * [`inner`]: the resonance solution near the crossing.
//! * [`adiabatic`]: outer modes, Berry phase, canonical and general modes.
//! * [`transition`]: closed-form transition matrices and their structural checks.
//! * [`oracle`]: direct integration of the full system and empirical transition matrices.
//! * [`models`]: builtin problems (graphene, Landau–Zener, two-mode waveguide, polynomial).
//!
//! [`analysis`] strings these together for the common end-to-end use.

pub mod adiabatic;
pub mod analysis;
pub mod degeneracy;
mod error;
pub mod inner;
pub mod models;
pub mod oracle;
pub mod pcf;
pub mod pencil;
pub mod quad;
pub mod transition;

pub use error::{Error, ErrorKind, Result};

pub use adiabatic::{AdiabaticConfig, AdiabaticModes, ModeSpec, Side};
pub use analysis::{Analysis, AnalysisOptions};
pub use degeneracy::{DegeneracyData, Scenario};
pub use inner::InnerState;
pub use models::Model;
pub use oracle::{EmpiricalTransition, OracleOptions, OracleTrace};
pub use pcf::PcfEvaluation;
pub use pencil::{EigenBranch, EigenPair, MatrixElementTable, PencilProblem};
pub use transition::{Convention, TransitionMatrix2};

/// Complex double.
pub type C64 = num_complex::Complex64;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
