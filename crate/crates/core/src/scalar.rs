//! Scalar abstraction shared by the numeric modules.
//!
//! Every learner, score and estimate in the crate is written against [`Real`]
//! so the same code runs in `f32` (compact models) and `f64` (the default).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by every numeric routine in the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Width in bytes of the on-disk encoding (4 or 8).
    const WIDTH: u8;

    /// Lossy conversion from `f64`; used for constants and parameters.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const WIDTH: u8 = 4;
}

impl Real for f64 {
    const WIDTH: u8 = 8;
}

/// Total order on reals with NaN sorted last; used for deterministic ranking.
#[inline]
pub(crate) fn total_cmp<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}

/// Index of the largest value, ties resolved to the lowest index.
pub(crate) fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
