//! Liouvillean spectra and dynamics of quantum many-body scar models under
//! local pure dephasing.
//!
//! The crate is organised bottom-up: [`spinlat`] builds bases, operators and
//! symmetry sectors, [`models`] assembles Hamiltonians, [`liouv`] turns them
//! into vectorized Lindblad generators, [`spectra`] diagonalizes and tracks
//! them across dephasing sweeps, [`greens`] holds the perturbative self-energy
//! analysis and [`dynamics`] integrates the master equation.

pub mod dynamics;
pub mod error;
pub mod greens;
pub mod linalg;
pub mod liouv;
pub mod models;
pub mod spectra;
pub mod spinlat;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
