//! Numerical laboratory for focusing Gibbs measures of the fractional NLS on
//! the torus `T^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: truncated Fourier fields on `T^d` and on large periodic
//!   boxes standing in for `R^d`.
//! * [`fields`]: exact sampling of fractional Gaussian free fields.
//! * [`ground_state`]: the Weinstein functional, its minimiser `Q` and the
//!   sharp Gagliardo–Nirenberg–Sobolev constant.
//! * [`sobolev`]: difference-quotient form of `Ḣ^s`, the constants
//!   `c_k(d, s)` and the torus GNS inequality.
//! * [`partition`]: Monte Carlo estimation of the mass-cutoff partition
//!   function along truncation ladders.
//! * [`variational`]: the Ornstein–Uhlenbeck smoother, soliton drifts and the
//!   drift objective.
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! Monte Carlo accumulators are always kept in `f64`. The aliases at the
//! bottom of this file fix the scalar to `f64` for everyday use.

pub mod error;
pub mod fields;
pub mod ground_state;
mod fft;
pub mod partition;
pub mod quadrature;
pub mod rng;
pub mod sobolev;
pub mod spectral;
pub mod stats;
pub mod variational;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};
pub use num_complex::Complex;

/// Scalar type the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. Anything the FFT backend can transform
/// and `num-traits` can treat as a float qualifies.
pub trait Real:
    Float + FloatConst + FromPrimitive + rustfft::FftNum + Default + Display + Debug + Send + Sync
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64`, used for statistics and output.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Double-precision grid.
pub type Grid = spectral::SpectralGrid<f64>;
/// Double-precision field.
pub type Field = spectral::SpectralField<f64>;
/// Single-precision field, mostly useful for memory-bound sampling.
pub type Field32 = spectral::SpectralField<f32>;
/// Double-precision Gaussian law.
pub type Law = fields::FieldLaw<f64>;
/// Double-precision GNS parameters.
pub type Gns = ground_state::GnsParameters<f64>;
/// Double-precision ground state.
pub type Profile = ground_state::GroundStateProfile<f64>;
/// Double-precision soliton drift.
pub type Drift = variational::SolitonDrift<f64>;
