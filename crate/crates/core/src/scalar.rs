//! Numeric abstraction shared by the load and energy computations.
//!
//! Loads are sums of even splits (`Ld / p`), so they are rationals with small
//! denominators. Floating point is the default; the exact rational types let
//! tests compare against values with no rounding at all.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Num, ToPrimitive};

/// A number usable for loads, shares and energy bookkeeping.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// The value `n` (a node count, a bit count, ...).
    fn from_count(n: usize) -> Self;

    /// The value `num / den`. `den` must be non-zero.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Relative slack allowed when checking a budget against an accumulated
    /// cost. Zero for exact types.
    fn rel_tolerance() -> Self;
}

macro_rules! impl_float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn rel_tolerance() -> Self {
                $tol
            }
        }
    };
}

impl_float_scalar!(f32, 1e-4);
impl_float_scalar!(f64, 1e-9);

impl Scalar for BigRational {
    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn rel_tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}

impl Scalar for Rational64 {
    fn from_count(n: usize) -> Self {
        Rational64::from_integer(n as i64)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational64::new(num, den)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn rel_tolerance() -> Self {
        Rational64::from_integer(0)
    }
}

/// Largest element under `PartialOrd`, first occurrence wins.
pub(crate) fn max_by_partial<T, S: PartialOrd>(
    items: impl IntoIterator<Item = (T, S)>,
) -> Option<(T, S)> {
    let mut best: Option<(T, S)> = None;
    for (item, value) in items {
        match &best {
            Some((_, b)) if value <= *b => {}
            _ => best = Some((item, value)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ratio_is_exact() {
        let third = <BigRational as Scalar>::from_ratio(1, 3);
        let sum = third.clone() + third.clone() + third;
        assert_eq!(sum, <BigRational as Scalar>::from_count(1));
        assert_eq!(
            <Rational64 as Scalar>::from_ratio(6, 4),
            Rational64::new(3, 2)
        );
    }

    #[test]
    fn float_conversions() {
        assert_eq!(<f64 as Scalar>::from_ratio(1, 4), 0.25);
        assert_eq!(Scalar::to_f64(&<f32 as Scalar>::from_count(7)), 7.0);
    }

    #[test]
    fn max_by_partial_keeps_first_of_ties() {
        let got = max_by_partial([(1, 2.0), (2, 3.0), (3, 3.0)]);
        assert_eq!(got, Some((2, 3.0)));
        assert_eq!(max_by_partial(Vec::<(u8, f64)>::new()), None);
    }
}
