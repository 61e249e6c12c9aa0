//! Arbitrary-precision rational arithmetic and dyadic approximation.
//!
//! [`ExactRational`] is the universal value type of the crate: measures,
//! martingale values, tolerances, and report residuals are all exact
//! rationals kept in lowest terms. Negative values can arise transiently
//! (signed residuals, the Robin Hood intermediate quantities) but are
//! rejected wherever a theory value must be nonnegative.
//!
//! [`dyadic_approx`] is the canonical finite-precision view: the value
//! `a * 2^{-r}` with `a = floor(x * 2^r)`, which under-approximates with
//! one-sided error strictly below `2^{-r}`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Exact rational number, always in lowest terms with positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRational(BigRational::one())
    }

    /// Builds `num/den`. Fails on a zero denominator.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(ExactRational(BigRational::new(
            BigInt::from(num),
            BigInt::from(den),
        )))
    }

    pub fn from_integer(n: i64) -> Self {
        ExactRational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(ExactRational(BigRational::new(num, den)))
    }

    /// `2^exp` for any integer exponent, exact.
    pub fn pow2(exp: i64) -> Self {
        let one = BigInt::one();
        if exp >= 0 {
            ExactRational(BigRational::from_integer(one << exp as usize))
        } else {
            ExactRational(BigRational::new(one.clone(), one << (-exp) as usize))
        }
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Rejects negative values with a descriptive error.
    pub fn require_nonnegative(&self) -> Result<()> {
        if self.is_negative() {
            Err(Error::NegativeValue(self.to_string()))
        } else {
            Ok(())
        }
    }

    /// `max(self - other, 0)`. Total; exists for the minus side of splitting
    /// constructions where nonnegativity is proved separately.
    pub fn sub_clamped(&self, other: &Self) -> Self {
        if self.0 >= other.0 {
            ExactRational(&self.0 - &other.0)
        } else {
            Self::zero()
        }
    }

    /// Exact subtraction that refuses to go negative.
    ///
    /// Used where `self >= other` is a proved inequality; the exactness guard
    /// is zero, so any violation is a bug in the caller and surfaces as an
    /// error instead of a silent clamp.
    pub fn sub_guarded(&self, other: &Self) -> Result<Self> {
        if self.0 >= other.0 {
            Ok(ExactRational(&self.0 - &other.0))
        } else {
            Err(Error::Underflow {
                a: self.to_string(),
                b: other.to_string(),
            })
        }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        if other.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(ExactRational(&self.0 / &other.0))
    }

    /// Absolute difference, for residuals and tolerance checks.
    pub fn dist(&self, other: &Self) -> Self {
        if self.0 >= other.0 {
            ExactRational(&self.0 - &other.0)
        } else {
            ExactRational(&other.0 - &self.0)
        }
    }

    pub fn abs(&self) -> Self {
        ExactRational(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    /// Smallest `b >= 0` with `self >= 2^{-b}`, for positive values.
    ///
    /// This is the per-value positivity exponent used by measure lower
    /// bounds: `2^{-bits}` is the coarsest dyadic at or below the value.
    pub fn positivity_exponent(&self) -> Result<u64> {
        if self.is_zero() || self.is_negative() {
            return Err(Error::Precondition(format!(
                "positivity exponent requires a positive value, got {self}"
            )));
        }
        let mut b: u64 = 0;
        let mut scaled = self.clone();
        let one = Self::one();
        while scaled < one {
            scaled = &scaled + &scaled;
            b += 1;
        }
        Ok(b)
    }
}

impl Default for ExactRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for ExactRational {
    type Err = Error;

    /// Parses `"p"` or `"p/q"`, with an optional leading sign on `p`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            what: "rational",
            input: s.to_string(),
        };
        let s = s.trim();
        let (num_str, den_str) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let num = BigInt::from_str(num_str.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den_str.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(ExactRational(BigRational::new(num, den)))
    }
}

impl Serialize for ExactRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &ExactRational) -> ExactRational {
                ExactRational(&self.0 $op &rhs.0)
            }
        }
        impl $trait for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: ExactRational) -> ExactRational {
                ExactRational(self.0 $op rhs.0)
            }
        }
        impl $trait<&ExactRational> for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &ExactRational) -> ExactRational {
                ExactRational(self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Div for &ExactRational {
    type Output = ExactRational;
    /// Panics on a zero divisor; use [`ExactRational::checked_div`] where the
    /// divisor is data-dependent.
    fn div(self, rhs: &ExactRational) -> ExactRational {
        assert!(!rhs.is_zero(), "division by zero rational");
        ExactRational(&self.0 / &rhs.0)
    }
}

impl Neg for &ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-&self.0)
    }
}

impl AddAssign<&ExactRational> for ExactRational {
    fn add_assign(&mut self, rhs: &ExactRational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ExactRational> for ExactRational {
    fn sub_assign(&mut self, rhs: &ExactRational) {
        self.0 -= &rhs.0;
    }
}

/// Dyadic rational `mantissa * 2^{-precision_bits}` tagged with its own
/// precision. Invariant: when produced by [`dyadic_approx`] or by rounded
/// evaluation, `|value - target| < 2^{-precision_bits}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DyadicApprox {
    pub mantissa: BigInt,
    pub precision_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct DyadicWire {
    mantissa: String,
    precision_bits: u32,
}

impl Serialize for DyadicApprox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DyadicWire {
            mantissa: self.mantissa.to_string(),
            precision_bits: self.precision_bits,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DyadicApprox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = DyadicWire::deserialize(deserializer)?;
        let mantissa = wire
            .mantissa
            .parse::<BigInt>()
            .map_err(serde::de::Error::custom)?;
        Ok(DyadicApprox {
            mantissa,
            precision_bits: wire.precision_bits,
        })
    }
}

impl DyadicApprox {
    pub fn to_rational(&self) -> ExactRational {
        ExactRational(BigRational::new(
            self.mantissa.clone(),
            BigInt::one() << self.precision_bits as usize,
        ))
    }
}

impl fmt::Display for DyadicApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^-{}", self.mantissa, self.precision_bits)
    }
}

/// Canonical one-sided dyadic approximation: `floor(x * 2^r) * 2^{-r}`.
///
/// For `x >= 0` the result under-approximates with error in `[0, 2^{-r})`,
/// is monotone in `x` at fixed `r`, and its error never grows when `r`
/// increases. Negative inputs are rejected: every approximated theory value
/// is nonnegative.
pub fn dyadic_approx(x: &ExactRational, r: u32) -> Result<DyadicApprox> {
    x.require_nonnegative()?;
    let scaled = (x.numer() << r as usize) / x.denom();
    Ok(DyadicApprox {
        mantissa: scaled,
        precision_bits: r,
    })
}

/// Rounds to the nearest multiple of `2^{-r}` (ties up); error at most
/// `2^{-(r+1)}`. Used when packaging an approximate evaluation whose own
/// error is already strictly below `2^{-(r+1)}`.
pub fn dyadic_round(x: &ExactRational, r: u32) -> Result<DyadicApprox> {
    x.require_nonnegative()?;
    let num = x.numer() << (r + 1) as usize;
    let twice = num / x.denom();
    let mantissa = (twice + BigInt::one()) >> 1;
    Ok(DyadicApprox {
        mantissa,
        precision_bits: r,
    })
}

/// Compares `a` against `2^{-r}` without materializing big powers.
pub fn cmp_pow2(a: &ExactRational, exp: i64) -> Ordering {
    a.cmp(&ExactRational::pow2(exp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(&rat("1/2") + &rat("1/3"), rat("5/6"));
        assert_eq!(rat("1/4").sub_clamped(&rat("1/2")), rat("0"));
        assert_eq!(&rat("3/4") * &rat("4/3"), rat("1"));
    }

    #[test]
    fn dyadic_approx_examples() {
        let d = dyadic_approx(&rat("1/3"), 2).unwrap();
        assert_eq!(d.to_rational(), rat("1/4"));
        let d = dyadic_approx(&rat("1/2"), 3).unwrap();
        assert_eq!(d.to_rational(), rat("1/2"));
        let d = dyadic_approx(&rat("0"), 5).unwrap();
        assert_eq!(d.to_rational(), rat("0"));
    }

    #[test]
    fn dyadic_approx_rejects_negative() {
        assert!(dyadic_approx(&rat("-1/2"), 4).is_err());
    }

    #[test]
    fn guarded_subtraction() {
        assert_eq!(rat("1/2").sub_guarded(&rat("1/4")).unwrap(), rat("1/4"));
        assert!(rat("1/4").sub_guarded(&rat("1/2")).is_err());
    }

    #[test]
    fn display_and_parse_round_trip() {
        for s in ["0", "1", "5/6", "-3/7", "1024"] {
            assert_eq!(rat(s).to_string(), s);
        }
        assert_eq!(rat("2/4"), rat("1/2"));
        assert_eq!(rat("-2/-4"), rat("1/2"));
        assert!("1/0".parse::<ExactRational>().is_err());
        assert!("x".parse::<ExactRational>().is_err());
    }

    #[test]
    fn positivity_exponent_examples() {
        assert_eq!(rat("1/2").positivity_exponent().unwrap(), 1);
        assert_eq!(rat("1/3").positivity_exponent().unwrap(), 2);
        assert_eq!(rat("1").positivity_exponent().unwrap(), 0);
        assert_eq!(rat("3/4").positivity_exponent().unwrap(), 1);
        assert!(rat("0").positivity_exponent().is_err());
    }

    #[test]
    fn pow2_signs() {
        assert_eq!(ExactRational::pow2(3), rat("8"));
        assert_eq!(ExactRational::pow2(-3), rat("1/8"));
        assert_eq!(ExactRational::pow2(0), rat("1"));
    }

    prop_compose! {
        fn arb_nonneg()(num in 0u64..1_000_000, den in 1u64..1_000_000) -> ExactRational {
            ExactRational::from_big(BigInt::from(num), BigInt::from(den)).unwrap()
        }
    }

    proptest! {
        #[test]
        fn dyadic_error_is_one_sided(x in arb_nonneg(), r in 0u32..=64) {
            let d = dyadic_approx(&x, r).unwrap().to_rational();
            prop_assert!(d <= x);
            prop_assert!(x.dist(&d) < ExactRational::pow2(-(r as i64)));
        }

        #[test]
        fn dyadic_monotone_in_x(a in arb_nonneg(), b in arb_nonneg(), r in 0u32..=32) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let dl = dyadic_approx(&lo, r).unwrap().to_rational();
            let dh = dyadic_approx(&hi, r).unwrap().to_rational();
            prop_assert!(dl <= dh);
        }

        #[test]
        fn dyadic_error_shrinks_with_precision(x in arb_nonneg(), r in 0u32..=31) {
            let coarse = dyadic_approx(&x, r).unwrap().to_rational();
            let fine = dyadic_approx(&x, r + 1).unwrap().to_rational();
            prop_assert!(x.dist(&fine) <= x.dist(&coarse));
        }

        #[test]
        fn lowest_terms_after_arithmetic(a in arb_nonneg(), b in arb_nonneg()) {
            let sum = &a + &b;
            let g = num::Integer::gcd(sum.numer(), sum.denom());
            prop_assert!(g.is_one() || sum.is_zero());
        }

        #[test]
        fn round_error_bounded(x in arb_nonneg(), r in 0u32..=32) {
            let d = dyadic_round(&x, r).unwrap().to_rational();
            prop_assert!(x.dist(&d) <= ExactRational::pow2(-(r as i64 + 1)));
        }
    }
}
