//! Exact rational arithmetic for time points, durations and ratios.
//!
//! Values are `i128` fractions kept in lowest terms. Every operation is
//! checked; an overflow is a bug in the caller's choice of inputs (the
//! generators keep denominators small and dyadic where possible), so it
//! panics loudly instead of silently rounding.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// An exact rational number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i128>);

/// Time points and processing volumes share the rational representation.
pub type TimeValue = Rational;

impl Rational {
    pub fn new(numer: i128, denom: i128) -> Result<Self, Error> {
        if denom == 0 {
            return Err(Error::InvalidInput(format!("zero denominator in {numer}/{denom}")));
        }
        Ok(Rational(Ratio::new(numer, denom)))
    }

    pub fn from_integer(n: i128) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn zero() -> Self {
        Rational(Ratio::zero())
    }

    pub fn one() -> Self {
        Rational(Ratio::one())
    }

    /// `2^exp` for any (possibly negative) exponent with `|exp| <= 126`.
    pub fn pow2(exp: i32) -> Self {
        assert!(exp.unsigned_abs() <= 126, "2^{exp} does not fit in i128");
        if exp >= 0 {
            Rational(Ratio::from_integer(1i128 << exp))
        } else {
            Rational(Ratio::new_raw(1, 1i128 << (-exp)))
        }
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn ceil(&self) -> i128 {
        self.0.ceil().to_integer()
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    /// Multiply by `2^exp` exactly.
    pub fn scale_pow2(&self, exp: i32) -> Self {
        self * &Rational::pow2(exp)
    }

    /// Approximate value; never used for decisions.
    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Always `num/den`, including when the denominator is one.
    pub fn to_fraction_string(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    /// Floor of the base-2 logarithm of a positive value.
    pub fn floor_log2(&self) -> Result<i32, Error> {
        if !self.is_positive() {
            return Err(Error::InvalidInput(format!("log2 of nonpositive value {self}")));
        }
        let n = self.numer();
        let d = self.denom();
        let bits = |v: i128| 127 - v.leading_zeros() as i32;
        let k = bits(n) - bits(d);
        // n/d lies in (2^(k-1), 2^(k+1)); one comparison against 2^k settles it.
        // The shifted operand has the same bit length as the other side, so no overflow.
        let below = if k >= 0 { n < (d << k) } else { (n << (-k)) < d };
        Ok(if below { k - 1 } else { k })
    }

    /// Smallest integer `s` with `2^s >= self`, for a positive value.
    pub fn ceil_log2(&self) -> Result<i32, Error> {
        let f = self.floor_log2()?;
        Ok(if *self == Rational::pow2(f) { f } else { f + 1 })
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl From<i128> for Rational {
    fn from(n: i128) -> Self {
        Rational::from_integer(n)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::from_integer(n as i128)
    }
}

macro_rules! checked_binop {
    ($trait:ident, $method:ident, $checked:ident, $sym:literal) => {
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                match self.0.$checked(&rhs.0) {
                    Some(v) => Rational(v),
                    None => panic!("rational overflow: {} {} {}", self, $sym, rhs),
                }
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$method(&rhs)
            }
        }
    };
}

checked_binop!(Add, add, checked_add, "+");
checked_binop!(Sub, sub, checked_sub, "-");
checked_binop!(Mul, mul, checked_mul, "*");

impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        assert!(!rhs.is_zero(), "rational division by zero: {self} / 0");
        match self.0.checked_div(&rhs.0) {
            Some(v) => Rational(v),
            None => panic!("rational overflow: {self} / {rhs}"),
        }
    }
}

impl Div<Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}

impl<'a> Div<&'a Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        &self / rhs
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = &*self - rhs;
    }
}

impl SubAssign<Rational> for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = &*self - &rhs;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl PartialEq<i128> for Rational {
    fn eq(&self, other: &i128) -> bool {
        self.is_integer() && self.numer() == *other
    }
}

impl PartialOrd<i128> for Rational {
    fn partial_cmp(&self, other: &i128) -> Option<Ordering> {
        Some(self.cmp(&Rational::from_integer(*other)))
    }
}

/// Bare integer when the denominator is one, `num/den` otherwise.
impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let parse = |part: &str| {
            part.trim()
                .parse::<i128>()
                .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
        };
        match s.split_once('/') {
            Some((n, d)) => {
                let d = parse(d)?;
                if d == 0 {
                    return Err(Error::Parse(format!("bad rational {s:?}: zero denominator")));
                }
                Rational::new(parse(n)?, d)
            }
            None => Ok(Rational::from_integer(parse(s)?)),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for literals in tests and generators: `q(3, 2)` is 3/2.
pub fn q(numer: i128, denom: i128) -> Rational {
    Rational::new(numer, denom).expect("nonzero denominator")
}
