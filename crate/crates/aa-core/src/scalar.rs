//! Floating-point scalar abstraction: everything in this crate is generic
//! over `Real`, implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Scalar type the solvers and bound calculators are generic over.
pub trait Real: Float + FromPrimitive + NumAssign + Sum + Debug + Display + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + 'static {}

/// Shorthand for converting an `f64` literal (tolerances, constants from the
/// problem definitions) into the working scalar type.
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Euclidean norm of a slice.
pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Dot product of two slices of equal length.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Inner product defining the geometry of the least-squares optimization.
/// Only the Euclidean one ships; the hook exists so weighted products can
/// be plugged in without touching the solvers.
pub trait InnerProduct<T: Real> {
    fn dot(&self, a: &[T], b: &[T]) -> T;

    fn norm(&self, v: &[T]) -> T {
        self.dot(v, v).max(T::zero()).sqrt()
    }
}

/// The standard l2 inner product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Euclidean;

impl<T: Real> InnerProduct<T> for Euclidean {
    fn dot(&self, a: &[T], b: &[T]) -> T {
        dot(a, b)
    }
}
