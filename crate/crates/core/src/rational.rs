//! Exact rational numbers.
//!
//! [`Rational`] wraps a reduced `i128` fraction. Every arithmetic operator is
//! checked: an intermediate that does not fit in 128 bits panics instead of
//! wrapping, so a result is either exact or absent.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A rational number kept in lowest terms with a positive denominator.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Builds `numer/denom`, reducing to lowest terms.
    ///
    /// Panics if `denom` is zero.
    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "rational with zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn from_integer(value: i128) -> Self {
        Rational(Ratio::from_integer(value))
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

    /// Largest integer not exceeding `self`.
    pub fn floor(&self) -> i128 {
        Integer::div_floor(&self.numer(), &self.denom())
    }

    /// Smallest integer not below `self`.
    pub fn ceil(&self) -> i128 {
        Integer::div_ceil(&self.numer(), &self.denom())
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
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

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_add(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_add(&rhs.0).map(Rational)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_sub(&rhs.0).map(Rational)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_mul(&rhs.0).map(Rational)
    }

    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_div(&rhs.0).map(Rational)
    }

    /// Greatest common divisor of two positive rationals: the largest `g`
    /// such that both `self / g` and `other / g` are integers.
    pub fn gcd(&self, other: &Self) -> Self {
        let numer = self.numer().gcd(&other.numer());
        let denom = self.denom().lcm(&other.denom());
        Rational::new(numer, denom)
    }

    /// Least common multiple of two positive rationals: the smallest positive
    /// `l` that is an integer multiple of both.
    pub fn lcm(&self, other: &Self) -> Self {
        self.checked_lcm(other).unwrap_or_else(|| panic!("rational lcm overflow: {self} and {other}"))
    }

    pub fn checked_lcm(&self, other: &Self) -> Option<Self> {
        let numer = checked_integer_lcm(self.numer(), other.numer())?;
        let denom = self.denom().gcd(&other.denom());
        Some(Rational::new(numer, denom))
    }

    /// The rational with the smallest denominator (then smallest numerator)
    /// strictly inside the open interval `(lo, hi)`.
    ///
    /// Walks the Stern–Brocot tree via continued fraction expansion. Requires
    /// `0 <= lo < hi`.
    pub fn simplest_between(lo: Rational, hi: Rational) -> Rational {
        assert!(!lo.is_negative() && lo < hi, "simplest_between needs 0 <= lo < hi");
        let whole = Rational::from_integer(lo.floor());
        let next = whole + Rational::ONE;
        if next < hi {
            return next;
        }
        // Both ends now lie in [whole, whole + 1]; recurse on x = whole + 1/y.
        let upper_gap = hi - whole;
        let inner = if lo == whole {
            // y ranges over (1/upper_gap, +inf)
            Rational::from_integer(upper_gap.recip().floor() + 1)
        } else {
            Rational::simplest_between(upper_gap.recip(), (lo - whole).recip())
        };
        whole + inner.recip()
    }
}

macro_rules! checked_op {
    ($trait:ident, $method:ident, $checked:ident, $what:literal) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$checked(&rhs)
                    .unwrap_or_else(|| panic!(concat!("rational ", $what, " overflow: {} and {}"), self, rhs))
            }
        }

        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                $trait::$method(self, *rhs)
            }
        }

        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $trait::$method(*self, rhs)
            }
        }

        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                $trait::$method(*self, *rhs)
            }
        }
    };
}

checked_op!(Add, add, checked_add, "addition");
checked_op!(Sub, sub, checked_sub, "subtraction");
checked_op!(Mul, mul, checked_mul, "multiplication");

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "rational division by zero");
        self.checked_div(&rhs).unwrap_or_else(|| panic!("rational division overflow: {self} and {rhs}"))
    }
}

impl<'a> Div<&'a Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        self / *rhs
    }
}

impl Div<Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        *self / rhs
    }
}

impl<'b> Div<&'b Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &'b Rational) -> Rational {
        *self / *rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational::ZERO - self
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = *self - rhs;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |acc, x| acc + *x)
    }
}

impl From<i128> for Rational {
    fn from(value: i128) -> Self {
        Rational::from_integer(value)
    }
}

impl From<i64> for Rational {
    fn from(value: i64) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl From<u64> for Rational {
    fn from(value: u64) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl From<i32> for Rational {
    fn from(value: i32) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl From<usize> for Rational {
    fn from(value: usize) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl One for Rational {
    fn one() -> Self {
        Rational::ONE
    }
}

impl Zero for Rational {
    fn zero() -> Self {
        Rational::ZERO
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// Integers print bare, everything else as `num/den`.
impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
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

/// Accepts `n`, `n/d` and finite decimals such as `2.25`.
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let invalid = || ParseRationalError::Invalid(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num: i128 = num.trim().parse().map_err(|_| invalid())?;
            let den: i128 = den.trim().parse().map_err(|_| invalid())?;
            if den == 0 {
                return Err(ParseRationalError::ZeroDenominator(s.to_string()));
            }
            return Ok(Rational::new(num, den));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let negative = int_part.starts_with('-');
            let int_value: i128 = match int_part {
                "" | "-" | "+" => 0,
                _ => int_part.parse().map_err(|_| invalid())?,
            };
            let scale = 10i128.checked_pow(frac_part.len() as u32).ok_or_else(invalid)?;
            let frac_value: i128 = frac_part.parse().map_err(|_| invalid())?;
            let magnitude =
                int_value.abs().checked_mul(scale).and_then(|v| v.checked_add(frac_value)).ok_or_else(invalid)?;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Rational::new(numer, scale));
        }
        s.parse::<i128>().map(Rational::from_integer).map_err(|_| invalid())
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(v) => Ok(Rational::from(v)),
        }
    }
}

/// `lcm(a, b)` for integers, `None` on overflow.
pub fn checked_integer_lcm(a: i128, b: i128) -> Option<i128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    let g = a.gcd(&b);
    (a / g).checked_mul(b).map(i128::abs)
}

/// Shorthand for `Rational::new(numer, denom)`.
pub fn rat(numer: i128, denom: i128) -> Rational {
    Rational::new(numer, denom)
}

/// Shorthand for an integer-valued rational.
pub fn int(value: i128) -> Rational {
    Rational::from_integer(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lowest_terms_and_sign() {
        let r = rat(6, -4);
        assert_eq!(r.numer(), -3);
        assert_eq!(r.denom(), 2);
        assert_eq!(r.to_string(), "-3/2");
        assert_eq!(int(4).to_string(), "4");
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(rat(7, 2).floor(), 3);
        assert_eq!(rat(-7, 2).floor(), -4);
        assert_eq!(rat(-7, 2).ceil(), -3);
        assert_eq!(int(5).floor(), 5);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3".parse::<Rational>().unwrap(), int(3));
        assert_eq!(" 10/4 ".parse::<Rational>().unwrap(), rat(5, 2));
        assert_eq!("2.25".parse::<Rational>().unwrap(), rat(9, 4));
        assert_eq!("-0.5".parse::<Rational>().unwrap(), rat(-1, 2));
        assert!(matches!("1/0".parse::<Rational>(), Err(ParseRationalError::ZeroDenominator(_))));
        assert!("abc".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
        assert!("1.".parse::<Rational>().is_err());
    }

    #[test]
    fn rational_gcd_and_lcm() {
        assert_eq!(rat(1, 2).gcd(&rat(1, 3)), rat(1, 6));
        assert_eq!(int(4).gcd(&int(6)), int(2));
        assert_eq!(rat(3, 2).lcm(&rat(5, 4)), rat(15, 2));
        assert_eq!(int(4).lcm(&int(6)), int(12));
    }

    #[test]
    fn simplest_between_examples() {
        assert_eq!(Rational::simplest_between(rat(1, 2), int(1)), rat(2, 3));
        assert_eq!(Rational::simplest_between(int(1), rat(5, 4)), rat(6, 5));
        assert_eq!(Rational::simplest_between(rat(5, 4), rat(3, 2)), rat(4, 3));
        assert_eq!(Rational::simplest_between(int(0), int(5)), int(1));
        assert_eq!(Rational::simplest_between(rat(3, 10), rat(1, 3)), rat(4, 13));
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_panics_instead_of_wrapping() {
        let big = int(i128::MAX / 2);
        let _ = big * int(4);
    }

    #[test]
    fn serde_as_strings() {
        let json = serde_json::to_string(&rat(3, 4)).unwrap();
        assert_eq!(json, "\"3/4\"");
        let back: Rational = serde_json::from_str("\"3/4\"").unwrap();
        assert_eq!(back, rat(3, 4));
        let from_int: Rational = serde_json::from_str("7").unwrap();
        assert_eq!(from_int, int(7));
    }

    /// Brute force over denominators: the first denominator with a numerator
    /// strictly inside the interval.
    fn simplest_by_scan(lo: Rational, hi: Rational) -> Rational {
        for den in 1..10_000i128 {
            let num = (lo * int(den)).floor() + 1;
            let cand = rat(num, den);
            if cand > lo && cand < hi {
                return cand;
            }
        }
        unreachable!()
    }

    proptest! {
        #[test]
        fn simplest_matches_denominator_scan(a in 0i128..200, b in 1i128..60, w in 1i128..40, c in 1i128..60) {
            let lo = rat(a, b);
            let hi = lo + rat(w, c * 3);
            let fast = Rational::simplest_between(lo, hi);
            prop_assert!(fast > lo && fast < hi);
            prop_assert_eq!(fast, simplest_by_scan(lo, hi));
        }

        #[test]
        fn display_parse_round_trip(n in -10_000i128..10_000, d in 1i128..10_000) {
            let r = rat(n, d);
            prop_assert_eq!(r.to_string().parse::<Rational>().unwrap(), r);
        }

        #[test]
        fn floor_brackets(n in -10_000i128..10_000, d in 1i128..500) {
            let r = rat(n, d);
            let fl = int(r.floor());
            prop_assert!(fl <= r && r < fl + int(1));
        }
    }
}
