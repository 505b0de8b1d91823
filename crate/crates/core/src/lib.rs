//! Numerics for the fractional heat semigroup exp(-t (-Lap)^s) on R^n,
//! n <= 3, s in (0, 1]: the self-similar kernel profile, spectral and
//! convolution evolution of integrable data, quantitative decay/convergence
//! measurements, and the confluent (rescaled) frame.
//!
//! Everything is generic over the scalar (`Real`, implemented for f32/f64);
//! the aliases at the root fix f64, which is what the binary uses.

pub mod asymptotics;
pub mod error;
pub mod fokker_planck;
pub mod grid;
pub mod interp;
pub mod kernel;
pub mod params;
pub mod quad;
pub mod real;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use params::FracParams;
pub use real::Real;

/// f64 parameter set.
pub type Params = FracParams<f64>;
/// f64 kernel profile.
pub type Profile = kernel::KernelProfile<f64>;
/// f64 grid geometry.
pub type Shape = grid::GridShape<f64>;
/// f64 grid samples.
pub type Grid = grid::GridFunction<f64>;
/// f64 initial datum.
pub type Datum = grid::InitialDatum<f64>;
