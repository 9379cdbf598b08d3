//! Scalar abstraction: all numerics are generic over a floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Lossy conversion back to `f64` (for reporting and serialization).
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::of(2.0)
    }

    #[inline]
    fn pi() -> Self {
        Self::of(std::f64::consts::PI)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Deterministic pairwise (binary-tree) summation.
///
/// The reduction tree depends only on the slice length, so the result is
/// independent of chunking decisions made by callers that parallelize.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        let pw = pairwise_sum(&xs);
        assert!((seq - pw).abs() < 1e-9);
    }

    #[test]
    fn generic_over_f32_and_f64() {
        fn mean<T: Real>(xs: &[T]) -> T {
            pairwise_sum(xs) / T::of(xs.len() as f64)
        }
        assert!((mean(&[1.0f32, 2.0, 3.0]) - 2.0).abs() < 1e-6);
        assert!((mean(&[1.0f64, 2.0, 3.0]) - 2.0).abs() < 1e-12);
    }
}
