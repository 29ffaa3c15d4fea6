//! Scalar backends: exact arbitrary-precision rationals and `f64`.
//!
//! All of the algebra in this crate is written against [`Scalar`], so every
//! operation can run either exactly (the default for certification) or in
//! floating point (for irrational inputs and Monte Carlo work).

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Rational = BigRational;

/// Default relative tolerance of the float backend.
pub const DEFAULT_FLOAT_TOL: f64 = 1e-10;

pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    /// `true` for backends with no rounding.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// Exact binary value of `x` on the rational backend.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    fn is_integer(&self) -> bool;

    /// Square root when it is representable in this backend.
    fn sqrt_exact(&self) -> Option<Self>;

    /// Parses `"p/q"`, decimal (`"-0.6"`, `"1e-3"`) or integer text.
    fn parse(text: &str) -> Result<Self>;

    /// `"p/q"` on the exact backend, shortest round-trip decimal on floats.
    fn render(&self) -> String {
        self.to_string()
    }

    /// Zero-cutoff for comparisons against a quantity of magnitude `scale`.
    fn tolerance(scale: &Self) -> Self;

    fn is_negative_beyond(&self, tol: &Self) -> bool {
        *self < -tol.clone()
    }

    fn is_within(&self, tol: &Self) -> bool {
        self.abs() <= *tol
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).unwrap_or_else(Rational::zero)
    }

    fn to_f64(&self) -> f64 {
        // Large numerators/denominators overflow a naive division.
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.numer().bits().max(self.denom().bits()) as i64 - 900;
                let (n, d) = if shift > 0 {
                    (self.numer() >> shift as usize, self.denom() >> shift as usize)
                } else {
                    (self.numer().clone(), self.denom().clone())
                };
                n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
            }
        }
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn is_integer(&self) -> bool {
        Rational::is_integer(self)
    }

    fn sqrt_exact(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        if &n * &n == *self.numer() && &d * &d == *self.denom() {
            Some(Rational::new(n, d))
        } else {
            None
        }
    }

    fn parse(text: &str) -> Result<Self> {
        parse_rational(text)
    }

    fn tolerance(_scale: &Self) -> Self {
        Rational::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn is_integer(&self) -> bool {
        self.fract() == 0.0
    }

    fn sqrt_exact(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }

    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: f64 = n.trim().parse().map_err(|_| Error::parse(text))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::parse(text))?;
            if d == 0.0 {
                return Err(Error::parse(text));
            }
            return Ok(n / d);
        }
        let v: f64 = t.parse().map_err(|_| Error::parse(text))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::parse(text))
        }
    }

    fn tolerance(scale: &Self) -> Self {
        DEFAULT_FLOAT_TOL * f64::abs(*scale).max(1.0)
    }
}

/// Exact parse of decimal, scientific or `p/q` text.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::parse(text));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(Error::parse(text));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = t[pos + 1..].parse().map_err(|_| Error::parse(text))?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::parse(text));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::parse(text));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str_radix(&all_digits, 10).map_err(|_| Error::parse(text))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Simplest rational within `tol` of `x` (continued-fraction convergents).
pub fn rationalize(x: f64, tol: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::parse(&x.to_string()));
    }
    let target = Rational::from_f64(x);
    let tol_r = Rational::from_f64(tol.abs());
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut rem = target.clone();
    for _ in 0..64 {
        let a = rem.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let approx = Rational::new(h.clone(), k.clone());
        if Signed::abs(&(&approx - &target)) <= tol_r {
            return Ok(approx);
        }
        let frac = &rem - Rational::from_integer(a);
        if frac.is_zero() {
            return Ok(approx);
        }
        rem = frac.recip();
    }
    Ok(target)
}

/// Sign of a rational as -1, 0 or +1.
pub fn signum(x: &Rational) -> i8 {
    match x.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}
