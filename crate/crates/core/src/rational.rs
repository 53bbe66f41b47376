//! Exact rational helpers shared by every module.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as a rational (expected an integer or \"p/q\")")]
pub struct ParseRationalError {
    pub input: String,
}

/// Parses `"p/q"`, `"-p/q"` or a plain integer.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError { input: s.to_string() };
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| err())?;
    let den = BigInt::from_str(den).map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(num, den))
}

/// `"p/q"` for non-integers, `"p"` for integers. Always reduced.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn ceil_to_u64(r: &Rational) -> Option<u64> {
    let c = r.ceil().to_integer();
    u64::try_from(c).ok()
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}

/// A ratio `cost / opt` that may be unbounded.
///
/// `0/0` is treated as 1; `x/0` with `x > 0` is `Infinite`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtRatio {
    Finite(Rational),
    Infinite,
}

impl ExtRatio {
    pub fn of(cost: &Rational, opt: &Rational) -> Self {
        if opt.is_zero() {
            if cost.is_zero() {
                ExtRatio::Finite(Rational::one())
            } else {
                ExtRatio::Infinite
            }
        } else {
            ExtRatio::Finite(cost / opt)
        }
    }

    pub fn one() -> Self {
        ExtRatio::Finite(Rational::one())
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRatio::Finite(r) => Some(r),
            ExtRatio::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRatio::Infinite)
    }
}

impl Ord for ExtRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRatio::Finite(a), ExtRatio::Finite(b)) => a.cmp(b),
            (ExtRatio::Finite(_), ExtRatio::Infinite) => Ordering::Less,
            (ExtRatio::Infinite, ExtRatio::Finite(_)) => Ordering::Greater,
            (ExtRatio::Infinite, ExtRatio::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExtRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRatio::Finite(r) => f.write_str(&format_rational(r)),
            ExtRatio::Infinite => f.write_str("inf"),
        }
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}
