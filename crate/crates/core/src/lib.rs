//! Linear evolution on subharmonic (`nT`-periodic) and localized domains,
//! tied together by Floquet–Bloch transforms.
//!
//! * [`grids`]: sampled functions, zero extension, periodization, norms.
//! * [`bloch`]: torus and line Bloch transforms and their identities.
//! * [`semigroup`]: operators with periodic coefficients, Bloch blocks, `e^{tA}`.
//! * [`lle`]: the Lugiato–Lefever linearization and its spectral stability.
//! * [`experiments`]: convergence runs comparing periodic and line solutions.

pub mod bloch;
pub mod error;
pub mod experiments;
mod fourier;
pub mod grids;
pub mod io;
pub mod lle;
pub mod semigroup;

pub use error::{Error, Result};
