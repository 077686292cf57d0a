//! Scalar abstraction shared by the metric and statistics code.
//!
//! Anything that is a ratio of counts (ROUGE precision/recall/F1) is generic
//! over [`Scalar`], which admits exact rationals. Anything that needs a square
//! root or a distribution function (cosine, t-tests) is generic over
//! [`num_traits::Float`].

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

/// A numeric type that can represent ratios of token counts.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lossless-as-possible conversion from a count.
    fn from_count(n: usize) -> Self;
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }
}

impl Scalar for Ratio<i128> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i128)
    }
}
