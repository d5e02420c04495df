//! Green's functions of the cracked dual lattice.
//!
//! * [`kernel`]: the full-lattice potential kernel and `G^h` differences.
//! * [`continuum_green`]: the continuum crack Green's function with zero
//!   Dirichlet data on the crack, built from the complex square root.
//! * [`solve_crack_green`]: the discrete Green's function with `G = 0` on
//!   `Γ*`, computed on a truncated disk.
//! * [`boundary_difference`] and [`check_max_principle`]: the kernel-level
//!   quantities behind the supremum bound.

mod continuum;
mod field;
pub mod kernel;
mod max_principle;
pub mod quadrature;

pub use continuum::continuum_green;
pub use field::{
    decay_envelope, grad_green, solve_crack_green, solve_crack_green_with, tip_harmonic,
    BoundaryScheme, DecayEnvelope, DualField, GreensField,
};
pub use kernel::{ghom_diff, potential_kernel};
pub use max_principle::{
    boundary_difference, check_max_principle, max_principle_boundary, MaxPrincipleReport,
};
pub use quadrature::potential_kernel_quadrature;

use crate::lattice::DualSite;
use crate::linsolve::SolverError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("source {0} lies on the dual crack line")]
    SourceOnCrack(DualSite),
    #[error("source {site} is not well inside the truncation radius {radius}")]
    SourceOutsideWindow { site: DualSite, radius: i32 },
    #[error("point lies on the crack or coincides with the source")]
    ContinuumDomain,
    #[error("site {0} is outside the stored window")]
    OutOfRange(DualSite),
    #[error("no boundary value supplied for {0}")]
    MissingBoundaryValue(DualSite),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
