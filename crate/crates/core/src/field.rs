//! The field-size parameter `q` and the two arithmetic modes used to
//! evaluate transition probabilities.

use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Field size `q > 1`. Inhibition happens with probability `1/q`.
///
/// Stored as an exact rational; float mode converts on demand.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldParam {
    q: BigRational,
}

impl FieldParam {
    pub fn new(q: BigRational) -> Result<Self> {
        if q <= BigRational::one() {
            return Err(Error::FieldParamTooSmall(q.to_string()));
        }
        Ok(Self { q })
    }

    pub fn from_integer(q: i64) -> Result<Self> {
        Self::new(BigRational::from_integer(BigInt::from(q)))
    }

    /// Nearest exact rational to a finite float. Intended for command-line
    /// input such as `2.5`; float mode only ever reads it back via `to_f64`.
    pub fn from_f64(q: f64) -> Result<Self> {
        let r = BigRational::from_float(q).ok_or_else(|| Error::FieldParamTooSmall(q.to_string()))?;
        Self::new(r)
    }

    pub fn exact(&self) -> &BigRational {
        &self.q
    }

    pub fn to_f64(&self) -> f64 {
        self.q.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn is_integer(&self) -> bool {
        self.q.is_integer()
    }
}

impl fmt::Display for FieldParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.q)
    }
}

/// Accepts `7`, `3/2` and decimals such as `2.5` or `1e6`, all parsed exactly.
impl FromStr for FieldParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }
}

/// Parses an integer, a fraction `num/den` or a decimal literal into an
/// exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let err = || Error::Parse(format!("cannot parse {s:?} as a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits == "-" || digits == "+" { return Err(err()) } else { digits };
    let value = BigInt::from_str(&digits).map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        BigRational::from_integer(value * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(value, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Numeric type a chain distribution is carried in: `f64` or exact
/// [`BigRational`].
pub trait Probability: Num + Clone + Send + Sync + fmt::Debug + PartialOrd + for<'a> AddAssign<&'a Self> {
    fn from_field(q: &FieldParam) -> Self;
    fn from_i64(v: i64) -> Self;
    fn as_f64(&self) -> f64;
    fn abs_value(&self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn is_exact() -> bool;

    fn powi(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc.mul_ref(self);
        }
        acc
    }
}

impl Probability for f64 {
    fn from_field(q: &FieldParam) -> Self {
        q.to_f64()
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn is_exact() -> bool {
        false
    }
    fn powi(&self, exp: u32) -> Self {
        f64::powi(*self, exp as i32)
    }
}

impl Probability for BigRational {
    fn from_field(q: &FieldParam) -> Self {
        q.exact().clone()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn is_exact() -> bool {
        true
    }
    fn powi(&self, exp: u32) -> Self {
        num_traits::pow(self.clone(), exp as usize)
    }
}
