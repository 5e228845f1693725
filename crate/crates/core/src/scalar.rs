//! Scalar abstraction shared by every solver in the crate.
//!
//! All numerics are written against [`Real`], a thin extension of
//! [`num_traits::Float`]. `f64` is the production type; `f32` is supported
//! for the grid and transform machinery, mostly as a check that nothing
//! silently depends on double precision constants.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type used throughout the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn pi() -> Self {
        Self::lit(std::f64::consts::PI)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// Lossy conversion used by the diagnostics that run dense `f64` algebra.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

fn nan_max<T: Real>(m: T, x: T) -> T {
    if x.is_nan() || m.is_nan() {
        T::nan()
    } else {
        m.max(x)
    }
}

/// Largest absolute entry of a slice, zero for an empty slice and NaN if
/// any entry is NaN.
pub fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| nan_max(m, x.abs()))
}

/// Largest absolute entrywise difference of two equally long slices; NaN
/// propagates.
pub fn sup_distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| nan_max(m, (x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert_eq!(<f64 as Real>::two(), 2.0);
    }

    #[test]
    fn norms() {
        assert_eq!(sup_norm::<f64>(&[]), 0.0);
        assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
        assert!(sup_norm(&[1.0, f64::NAN, 2.0]).is_nan());
        assert!(sup_distance(&[1.0, 2.0], &[f64::NAN, 2.0]).is_nan());
        assert_eq!(sup_distance(&[1.0, 2.0], &[1.5, 0.0]), 2.0);
    }
}
