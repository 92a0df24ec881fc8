//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the ensemble, learner and drift code run on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64` itself.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Scalar")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Little-endian bytes of the value widened to `f64`, used for hashing.
    #[inline]
    fn hash_bytes(self) -> [u8; 8] {
        self.as_f64().to_le_bytes()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equally sized dense slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Correctly rounded sum of finite values, so the result does not depend on
/// the order of the terms. Uses the non-overlapping partials method with a
/// round-half-even finish.
pub fn exact_sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    // f64 needs at most about 40 partials; f32 fewer.
    let mut partials = [S::zero(); 64];
    let mut len = 0;
    for mut x in values {
        let mut kept = 0;
        for j in 0..len {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != S::zero() {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials[kept] = x;
        len = kept + 1;
    }
    if len == 0 {
        return S::zero();
    }
    let mut n = len - 1;
    let mut hi = partials[n];
    let mut lo = S::zero();
    while n > 0 {
        let x = hi;
        let y = partials[n - 1];
        n -= 1;
        hi = x + y;
        lo = y - (hi - x);
        if lo != S::zero() {
            break;
        }
    }
    if n > 0 && ((lo < S::zero() && partials[n - 1] < S::zero()) || (lo > S::zero() && partials[n - 1] > S::zero())) {
        let y = lo + lo;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Scales `v` to unit L2 norm in place. Zero vectors are left untouched.
pub fn normalize_in_place<S: Scalar>(v: &mut [S]) {
    let norm = l2_norm(v);
    if norm > S::zero() {
        for x in v.iter_mut() {
            *x = *x / norm;
        }
    }
}

/// Total order for scalars that treats NaN as the smallest value.
#[inline]
pub fn total_cmp<S: Scalar>(a: S, b: S) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Less,
        _ => std::cmp::Ordering::Greater,
    })
}
