//! Scalar abstraction: every numeric kernel is generic over `Real`,
//! implemented for `f32` and `f64`.

use num_traits::{Float, FromPrimitive};

pub trait Real:
    Float
    + FromPrimitive
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert a literal `f64` constant into the scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Widen to `f64` (exact for both supported types).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
