//! Exact non-negative rationals used for thresholds, load factors and
//! per-byte network cost.
//!
//! Config files may write these as JSON numbers (`0.6`), decimal strings
//! (`"0.6"`) or ratios (`"3/5"`). A JSON number is read through its
//! shortest round-trip decimal form, so `0.6` becomes exactly 3/5.
//! Serialization always produces a string: a plain decimal when the value
//! terminates, `p/q` otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseFractionError(pub String);

impl Fraction {
    pub fn zero() -> Self {
        Fraction(BigRational::zero())
    }

    pub fn one() -> Self {
        Fraction(BigRational::one())
    }

    pub fn from_integer(value: u64) -> Self {
        Fraction(BigRational::from_integer(BigInt::from(value)))
    }

    /// `num / den`. Panics when `den` is zero.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Fraction(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(value: BigRational) -> Self {
        Fraction(value)
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    /// Reads an `f64` through its shortest round-trip decimal representation.
    pub fn from_f64(value: f64) -> Result<Self, ParseFractionError> {
        if !value.is_finite() {
            return Err(ParseFractionError(value.to_string()));
        }
        value.to_string().parse()
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

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Nearest integer, halves rounded up. Negative values clamp to zero.
    pub fn round_half_up(&self) -> u64 {
        if self.0.is_negative() {
            return 0;
        }
        let numer = self.0.numer();
        let denom = self.0.denom();
        let twice = numer * BigInt::from(2u8) + denom;
        let rounded = twice.div_floor(&(denom * BigInt::from(2u8)));
        rounded.to_u64().unwrap_or(u64::MAX)
    }

    pub fn ceil_u64(&self) -> u64 {
        if self.0.is_negative() {
            return 0;
        }
        self.0.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
    }

    pub fn floor_u64(&self) -> u64 {
        if self.0.is_negative() {
            return 0;
        }
        self.0.floor().to_integer().to_u64().unwrap_or(u64::MAX)
    }

    /// True when `0 < self <= 1`.
    pub fn in_unit_open_closed(&self) -> bool {
        self.is_positive() && self.0 <= BigRational::one()
    }

    /// True when `0 <= self <= 1`.
    pub fn in_unit_closed(&self) -> bool {
        !self.is_negative() && self.0 <= BigRational::one()
    }

    fn to_canonical_string(&self) -> String {
        let numer = self.0.numer().clone();
        let denom = self.0.denom().clone();
        if denom.is_one() {
            return numer.to_string();
        }
        // Terminating decimal iff the reduced denominator is 2^a 5^b.
        let mut rest = denom.clone();
        let (two, five) = (BigInt::from(2u8), BigInt::from(5u8));
        let (mut twos, mut fives) = (0u32, 0u32);
        while rest.is_even() {
            rest /= &two;
            twos += 1;
        }
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return format!("{numer}/{denom}");
        }
        let scale = twos.max(fives);
        let scaled = numer.abs() * num_traits::pow(BigInt::from(10u8), scale as usize) / &denom;
        let digits = format!(
            "{:0>width$}",
            scaled.to_string(),
            width = scale as usize + 1
        );
        let (int_part, frac_part) = digits.split_at(digits.len() - scale as usize);
        let sign = if numer.is_negative() { "-" } else { "" };
        format!("{sign}{int_part}.{frac_part}")
    }
}

impl FromStr for Fraction {
    type Err = ParseFractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFractionError(s.to_string());
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| err())?;
            let den: BigInt = den.trim().parse().map_err(|_| err())?;
            if den.is_zero() {
                return Err(err());
            }
            return Ok(Fraction(BigRational::new(num, den)));
        }
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(pos) => {
                let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
                (&s[..pos], exp)
            }
            None => (s, 0),
        };
        let (negative, mantissa) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
        {
            return Err(err());
        }
        let digits: BigInt = format!("0{int_part}{frac_part}")
            .parse()
            .map_err(|_| err())?;
        let scale = exponent - frac_part.len() as i32;
        let ten = BigInt::from(10u8);
        let mut value = if scale >= 0 {
            BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
        };
        if negative {
            value = -value;
        }
        Ok(Fraction(value))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_canonical_string())
    }
}

struct FractionVisitor;

impl Visitor<'_> for FractionVisitor {
    type Value = Fraction;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number, a decimal string or a \"p/q\" ratio")
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Fraction, E> {
        Ok(Fraction::from_integer(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Fraction, E> {
        Ok(Fraction(BigRational::from_integer(BigInt::from(v))))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Fraction, E> {
        Fraction::from_f64(v).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Fraction, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(FractionVisitor)
    }
}

impl PartialEq<u64> for Fraction {
    fn eq(&self, other: &u64) -> bool {
        self.0 == BigRational::from_integer(BigInt::from(*other))
    }
}

impl PartialOrd<u64> for Fraction {
    fn partial_cmp(&self, other: &u64) -> Option<Ordering> {
        self.0
            .partial_cmp(&BigRational::from_integer(BigInt::from(*other)))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Fraction {
            type Output = Fraction;
            fn $method(self, rhs: Fraction) -> Fraction {
                Fraction(self.0.$method(rhs.0))
            }
        }

        impl<'a> $trait<&'a Fraction> for &'a Fraction {
            type Output = Fraction;
            fn $method(self, rhs: &'a Fraction) -> Fraction {
                Fraction((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Mul<u64> for &Fraction {
    type Output = Fraction;
    fn mul(self, rhs: u64) -> Fraction {
        Fraction(&self.0 * BigRational::from_integer(BigInt::from(rhs)))
    }
}

impl From<u64> for Fraction {
    fn from(value: u64) -> Self {
        Fraction::from_integer(value)
    }
}
