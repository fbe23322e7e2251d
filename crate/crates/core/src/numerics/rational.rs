use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Exact reduced fraction with positive denominator.
pub type Rational = num_rational::BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `p/q`, always with an explicit denominator.
pub fn rational_to_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational, NumericsError> {
    let bad = || NumericsError::Parse(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        None => s.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad()),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A constant of the form `rational` or `rational * sqrt(2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleConstant {
    #[serde(with = "rational_serde")]
    pub rational: Rational,
    pub sqrt2: bool,
}

impl ScaleConstant {
    pub fn one() -> Self {
        Self { rational: Rational::one(), sqrt2: false }
    }

    pub fn value(&self) -> f64 {
        let r = rational_to_f64(&self.rational);
        if self.sqrt2 {
            r * std::f64::consts::SQRT_2
        } else {
            r
        }
    }

    pub fn is_one(&self) -> bool {
        !self.sqrt2 && self.rational.is_one()
    }
}

impl fmt::Display for ScaleConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.sqrt2 {
            return write!(f, "{}", self.rational);
        }
        let n = self.rational.numer();
        let sign = if n.is_negative() { "-" } else { "" };
        let n = n.abs();
        let lead = if n.is_one() { String::new() } else { n.to_string() };
        if self.rational.denom().is_one() {
            write!(f, "{sign}{lead}√2")
        } else {
            write!(f, "{sign}{lead}√2/{}", self.rational.denom())
        }
    }
}

pub(crate) mod rational_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text() {
        assert_eq!(rational_to_string(&rat(2, 4)), "1/2");
        assert_eq!(rational_to_string(&rat(3, 1)), "3/1");
        assert_eq!(rational_to_string(&rat(1, -3)), "-1/3");
        assert_eq!(parse_rational(" 6/8 ").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("5").unwrap(), rat(5, 1));
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn scale_constant_text() {
        let c = ScaleConstant { rational: rat(3, 8), sqrt2: true };
        assert_eq!(c.to_string(), "3√2/8");
        assert!((c.value() - 0.530_330_085_889_910_6).abs() < 1e-15);
        assert_eq!(ScaleConstant::one().to_string(), "1");
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"rational":"3/8","sqrt2":true}"#);
    }
}
