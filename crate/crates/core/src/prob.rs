//! Probability scalars.
//!
//! Every table-driven computation in the crate is generic over [`Prob`], so
//! the same dynamic program runs in floating point for desk-scale Monte Carlo
//! and in exact rationals for small-instance oracles.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::{BigRational, One, ToPrimitive, Zero};

use crate::Error;

pub type Rational = BigRational;

/// Scalar used for probabilities and moments.
pub trait Prob:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for exact arithmetic.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// Largest integer not exceeding the value.
    fn floor_i64(&self) -> i64;
    /// Tolerance used when checking that a law sums to one.
    fn sums_to_one(&self) -> bool;
}

impl Prob for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn sums_to_one(&self) -> bool {
        (self - 1.0).abs() <= 1e-12
    }
}

impl Prob for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // numerator/denominator too large for a direct conversion
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn floor_i64(&self) -> i64 {
        self.floor().to_integer().to_i64().expect("floor out of i64 range")
    }
    fn sums_to_one(&self) -> bool {
        num::One::is_one(self)
    }
}

/// Parses `num/den` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => BigInt::from_str(s).map(BigRational::from_integer).map_err(|_| bad()),
    }
}

/// A probability written either as `num/den` (or a bare integer) or as a decimal.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbLiteral {
    Exact(Rational),
    Float(f64),
}

impl ProbLiteral {
    pub fn parse(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.contains('/') || (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())) {
            parse_rational(s).map(ProbLiteral::Exact)
        } else {
            s.parse::<f64>()
                .map(ProbLiteral::Float)
                .map_err(|_| Error::Parse(format!("not a probability: {s:?}")))
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ProbLiteral::Exact(r) => Prob::to_f64(r),
            ProbLiteral::Float(f) => *f,
        }
    }

    /// Exact value; decimals are converted through their shortest decimal form.
    pub fn to_rational(&self) -> Rational {
        match self {
            ProbLiteral::Exact(r) => r.clone(),
            ProbLiteral::Float(f) => decimal_to_rational(*f),
        }
    }
}

fn decimal_to_rational(v: f64) -> Rational {
    let text = format!("{v}");
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(&digits).unwrap_or_default();
    let den = num::pow(BigInt::from(10), frac_part.len());
    BigRational::new(num, den)
}

/// Renders a rational as `num/den` (or just `num` for integers).
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn rational_pow(base: &Rational, exp: i64) -> Rational {
    if exp >= 0 {
        num::pow(base.clone(), exp as usize)
    } else {
        num::pow(base.recip(), exp.unsigned_abs() as usize)
    }
}
