//! Small helpers for exact rational scalars and their string forms.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub fn zero() -> BigRational {
    BigRational::zero()
}

pub fn one() -> BigRational {
    BigRational::one()
}

pub fn from_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn from_pair(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses either an integer string or a `p/q` fraction string.
pub fn parse(text: &str) -> Result<BigRational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let num = BigInt::from_str(p.trim())
            .map_err(|_| Error::Parse(format!("bad rational {text:?}")))?;
        let den = BigInt::from_str(q.trim())
            .map_err(|_| Error::Parse(format!("bad rational {text:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        Ok(BigRational::new(num, den))
    } else {
        let num = BigInt::from_str(text)
            .map_err(|_| Error::Parse(format!("bad rational {text:?}")))?;
        Ok(BigRational::from_integer(num))
    }
}

/// Parses a `(numerator, denominator)` pair of decimal strings.
pub fn parse_parts(num: &str, den: &str) -> Result<BigRational> {
    let n = BigInt::from_str(num.trim())
        .map_err(|_| Error::Parse(format!("bad numerator {num:?}")))?;
    let d = BigInt::from_str(den.trim())
        .map_err(|_| Error::Parse(format!("bad denominator {den:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(BigRational::new(n, d))
}

/// Decimal string parts `(numerator, denominator)` of a reduced rational.
pub fn to_parts(v: &BigRational) -> (String, String) {
    (v.numer().to_string(), v.denom().to_string())
}

/// Compact single-string form: `"3"` or `"-1/2"`.
pub fn to_string(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Integer power with negative exponents allowed (errors on 0^negative).
pub fn pow(base: &BigRational, exp: i64) -> Result<BigRational> {
    if exp == 0 {
        return Ok(one());
    }
    if base.is_zero() && exp < 0 {
        return Err(Error::SingularMatrix);
    }
    let mut acc = one();
    for _ in 0..exp.unsigned_abs() {
        acc *= base;
    }
    if exp < 0 {
        acc = acc.recip();
    }
    Ok(acc)
}

pub fn is_negative(v: &BigRational) -> bool {
    v.is_negative()
}
