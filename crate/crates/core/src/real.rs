use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Scalar type for all numerics in this crate. Implemented for `f32` and `f64`.
///
/// Everything downstream (quadrature, profiles, grids, experiments) is generic
/// over `Real`; the crate root exports `f64` aliases for the common case.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant into `Self` (lossy for `f32`).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    fn of_usize(k: usize) -> Self {
        Self::from_usize(k).expect("index representable as scalar")
    }

    /// Widen to `f64` for diagnostics and export.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
