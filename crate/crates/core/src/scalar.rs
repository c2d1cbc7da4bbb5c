//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Real floating point type the solvers are generic over (`f32` or `f64`).
///
/// `Float` and `Signed` (pulled in through `FftNum`) both define `abs`, so
/// generic code calls `Float::abs(x)` explicitly.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum
    + Default
    + Display
    + LowerExp
    + Debug
    + NumAssign
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used for construction-time self checks (isometry etc.).
    fn check_tol() -> Self {
        Float::sqrt(Self::epsilon())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Unit-modulus phase `z/|z|`, with the convention phase = 1 where `z = 0`.
#[inline]
pub fn phase<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = z.norm();
    if r > T::zero() {
        z / r
    } else {
        Complex::new(T::one(), T::zero())
    }
}
