//! Jacobians of the ADMM sweep at its fixed point and their spectra.

mod analytic;
pub mod eigen;
mod fd;
mod spectrum;

pub use analytic::{analytic_jacobian, THRESHOLD_MARGIN};
pub use eigen::eigenvalues;
pub use fd::{fd_jacobian, fd_jacobian_with, Difference};
pub use spectrum::{
    read_eigenvalues_csv, spectrum_of, spectrum_with_tolerance, write_eigenvalues_csv, Classification, Spectrum,
    DEFAULT_IMAG_TOLERANCE,
};
