//! ADMM cast as a fixed-point iteration, accelerated with windowed Anderson
//! acceleration `AA(m)` and stationary Anderson acceleration `sAA(m)`, together
//! with the spectral machinery that predicts the asymptotic linear convergence
//! factor of each scheme from the Jacobian of the ADMM sweep at its fixed point.
//!
//! Everything numeric is generic over a [`Real`] scalar (`f32` or `f64`). The
//! `*64` aliases at the bottom of this file are what the harness and most
//! callers use.
//!
//! Layout:
//!
//! * [`fixed_point`] the map contract, the plain iteration driver, reference
//!   solutions and observed convergence factors.
//! * [`anderson`] `AA(m)` and `sAA(m)` steppers on top of any map.
//! * [`problems`] the six benchmark problems, their proximal operators and the
//!   seeded instance generator.
//! * [`jacobian`] finite-difference and piecewise-analytic Jacobians, and a dense
//!   nonsymmetric eigenvalue solver.
//! * [`theory`] optimal stationary coefficients and predicted factors.

pub mod anderson;
pub mod error;
pub mod fixed_point;
pub mod jacobian;
pub mod linalg;
pub mod problems;
pub mod theory;

use std::fmt::{Debug, Display, LowerExp};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex;

pub use crate::error::{Error, Result};

/// Scalar type the whole crate is generic over.
///
/// All arithmetic goes through [`nalgebra::RealField`]; the num-traits
/// conversions are used to move constants and generated data in and out.
pub trait Real:
    nalgebra::RealField
    + Copy
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Unit roundoff of the type.
    fn eps() -> Self;

    /// Converts an `f64` constant. Panics only if the constant is unrepresentable.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }
}

pub type IterationTrace64 = fixed_point::IterationTrace<f64>;
pub type ConvergenceEstimate64 = fixed_point::ConvergenceEstimate<f64>;
pub type SaaPlan64 = anderson::SaaPlan<f64>;
pub type Scheme64 = anderson::Scheme<f64>;
pub type ProblemInstance64 = problems::ProblemInstance<f64>;
pub type AdmmMap64 = problems::AdmmMap<f64>;
pub type Spectrum64 = jacobian::Spectrum<f64>;
pub type OptimalSaaResult64 = theory::OptimalSaaResult<f64>;

/// Modulus of a complex number.
#[inline]
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal square root of a complex number.
#[inline]
pub(crate) fn csqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    <Complex<T> as nalgebra::ComplexField>::sqrt(z)
}
