//! Floquet multipliers, spectral bands, and quasi-periodic eigenvalues for
//! ordinary differential operators of order n with m×m PT-symmetric
//! 1-periodic matrix coefficients.
//!
//! The pipeline: PT-symmetric Fourier coefficients ([`coefficients`]) feed a
//! companion linearization ([`companion`]), which is integrated over one
//! period ([`propagator`]); the monodromy eigenvalues ([`eigensolve`]) are
//! the Floquet multipliers, from which spectra, band scans, and eigenvalues
//! of the quasi-periodic boundary problems are derived ([`spectrum`]). The
//! [`verify`] module cross-checks every step against closed-form oracles and
//! the spectral-symmetry laws of this operator class.


pub mod cmatrix;
pub mod coefficients;
pub mod companion;
pub mod eigensolve;
pub mod propagator;
pub mod spectrum;
pub mod verify;

pub use cmatrix::CMat;
pub use coefficients::{CoefficientProvider, CoefficientSet, FourierEntry};
pub use propagator::{IntegratorSettings, Monodromy, Trajectory};


