//! Scalar abstraction for the type-agnostic numeric kernels.
//!
//! The polynomial/tensor kernels and the orthogonal-polynomial recurrences do
//! not care about the concrete float width, so they are written against this
//! trait. The sketch pipeline itself (rounding, streaming, serialization) is
//! pinned to 64-bit floats via the [`Real`](crate::Real) alias at the crate
//! root.

use num_traits::{Float, FromPrimitive};
use std::fmt::Debug;
use std::iter::Sum;

/// Floating point scalar: f32 or f64.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {
    /// Lossless-enough conversion from f64 for constants.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant conversion")
    }

    /// Conversion from usize counters.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Squared chordal distance between two vectors.
#[inline]
pub fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// |t|^p with fast paths for small integer exponents.
#[inline]
pub fn abs_powf<T: Scalar>(t: T, p: T) -> T {
    let a = t.abs();
    if p == T::one() {
        a
    } else if p == T::c(2.0) {
        a * a
    } else if p == T::c(3.0) {
        a * a * a
    } else {
        a.powf(p)
    }
}
