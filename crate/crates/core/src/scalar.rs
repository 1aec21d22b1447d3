use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Number type for scores and averaged counts.
///
/// Implemented for `f32`, `f64` and exact rationals such as
/// `num_rational::Ratio<i64>`.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

/// Arithmetic mean; `None` for an empty input.
pub fn mean<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    let (sum, n) = values.into_iter().fold((S::zero(), 0u64), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / S::from_count(n))
}
