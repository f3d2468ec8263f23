//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Real floating point type the solvers are generic over. Implemented for
/// `f32` and `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + FftNum + Default + Display + LowerExp + Debug + FromStr
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }

    /// Converts an index or count into `Self`.
    fn from_index(k: usize) -> Self {
        <Self as FromPrimitive>::from_usize(k).expect("index representable")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
