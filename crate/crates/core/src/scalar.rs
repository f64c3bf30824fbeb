//! Numeric abstraction shared by the scoring code.
//!
//! Every ratio the crate reports (precision, recall, edit similarity,
//! average precision, pass@k) is built from integer counts, so the scoring
//! functions are written once against [`Scalar`] and instantiated either with
//! binary floats or with exact rationals.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, NumCast};

/// A field-like number type that can be built from an integer ratio.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`. `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self;

    fn from_count(n: u64) -> Self {
        Self::from_ratio(n, 1)
    }

    /// Lossy view used for reporting.
    fn to_f64(&self) -> f64;

    /// Harmonic mean of two non-negative values, zero when both are zero.
    fn harmonic_mean(a: &Self, b: &Self) -> Self {
        let sum = a.clone() + b.clone();
        if sum.is_zero() {
            return Self::zero();
        }
        let two = Self::one() + Self::one();
        two * a.clone() * b.clone() / sum
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: u64, den: u64) -> Self {
                debug_assert!(den != 0);
                num as $t / den as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

macro_rules! impl_ratio_scalar {
    ($t:ty) => {
        impl Scalar for Ratio<$t> {
            fn from_ratio(num: u64, den: u64) -> Self {
                let num = <$t as NumCast>::from(num).expect("numerator overflows the rational base");
                let den = <$t as NumCast>::from(den).expect("denominator overflows the rational base");
                Ratio::new(num, den)
            }

            fn to_f64(&self) -> f64 {
                let n = <f64 as NumCast>::from(*self.numer()).unwrap_or(f64::NAN);
                let d = <f64 as NumCast>::from(*self.denom()).unwrap_or(f64::NAN);
                n / d
            }
        }
    };
}

impl_ratio_scalar!(i64);
impl_ratio_scalar!(i128);
