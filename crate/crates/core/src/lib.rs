//! Numerical toolkit for the simplified fast-reaction Keller–Rubinow
//! (HHMO) precipitation model.
//!
//! * [`specfun`]: Kummer's function M and erfc.
//! * [`profile`]: the self-similar profile Φ, its eigenvalue pair (κ, γ) and Ψ.
//! * [`kernel`]: the memory kernel K, the constant Γ, synthetic and tabulated kernels.
//! * [`rings`]: band-by-band solution of the relay integral equation and breakdown classification.
//! * [`degenerate`]: construction of a kernel whose ring solution cannot be continued.
//! * [`extended`]: extended (completed-relay) solutions and the regular extension.
//! * [`pde`]: finite-difference solver in similarity variables.

pub mod degenerate;
pub mod error;
pub mod extended;
pub mod kernel;
pub mod pde;
pub mod profile;
pub mod quad;
pub mod rings;
pub mod specfun;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelTable, Ratio, SyntheticKernel, TabulatedKernel};
pub use profile::{ModelParams, Profile};
