use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating point type the evaluator and optimizer are generic over.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Base step for central finite differences; scaled by `max(1, |x|)`.
    const FD_STEP: f64;

    /// Converts an `f64` constant. Literals in the model language are parsed as `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any Float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const FD_STEP: f64 = 1e-6;
}

impl Scalar for f32 {
    // roughly cbrt(f32::EPSILON)
    const FD_STEP: f64 = 5e-3;
}
