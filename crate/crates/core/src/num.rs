//! Scalar abstraction for the floating-point math in this crate.
//!
//! Counts and timestamps stay as integers throughout; everything that is
//! genuinely continuous (percentiles, losses, regression, reachability
//! distances) is generic over [`Scalar`] so the same code runs at f32 or
//! f64 precision. Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from f64, panicking only for exotic scalar types.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 must convert into Scalar")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize must convert into Scalar")
    }

    fn from_i64_lossy(v: i64) -> Self {
        Self::from_i64(v).expect("i64 must convert into Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
