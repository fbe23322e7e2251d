//! Exact dyadic and rational arithmetic, plus the backend switch used by the
//! simulation code.

mod dyadic;
pub mod float;
mod rational;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use dyadic::{canonicalize, Dyadic};
pub use rational::{parse_rational, rat, rational_to_f64, rational_to_string, Rational, ScaleConstant};

/// Orbits longer than this are refused by the exact backend.
pub const DEFAULT_EXACT_ORBIT_CAP: usize = 10_000;

/// Worst-case breakpoint misclassification distance documented for the
/// float backend.
pub const FLOAT_CLASSIFICATION_TOLERANCE: f64 = 1.0 / (1u64 << 50) as f64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericsError {
    #[error("parse error: {0}")]
    Parse(String),
}

/// A slope `±2^log2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slope {
    pub negative: bool,
    pub log2: i32,
}

impl Slope {
    pub const fn new(negative: bool, log2: i32) -> Self {
        Self { negative, log2 }
    }

    pub fn as_dyadic(&self) -> Dyadic {
        let v = Dyadic::pow2(self.log2);
        if self.negative {
            -v
        } else {
            v
        }
    }

    pub fn as_f64(&self) -> f64 {
        let v = libm::ldexp(1.0, self.log2);
        if self.negative {
            -v
        } else {
            v
        }
    }

    pub fn inverse(&self) -> Slope {
        Slope { negative: self.negative, log2: -self.log2 }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.negative { "-" } else { "" };
        if self.log2 >= 0 {
            write!(f, "{sign}{}", 1u128 << self.log2.min(127))
        } else {
            write!(f, "{sign}1/{}", 1u128 << (-self.log2).min(127))
        }
    }
}

impl FromStr for Slope {
    type Err = NumericsError;

    /// Accepts `±k` or `±1/k` with `k` a power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NumericsError::Parse(format!("not a signed power of two: {s:?}"));
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let pow2_log = |t: &str| -> Result<i32, NumericsError> {
            let k: u128 = t.trim().parse().map_err(|_| bad())?;
            if k == 0 || !k.is_power_of_two() {
                return Err(bad());
            }
            Ok(k.trailing_zeros() as i32)
        };
        let log2 = match body.split_once('/') {
            None => pow2_log(body)?,
            Some((one, k)) => {
                if one.trim() != "1" {
                    return Err(bad());
                }
                -pow2_log(k)?
            }
        };
        Ok(Slope { negative, log2 })
    }
}

impl Serialize for Slope {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Slope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `slope * x + intercept`, exactly.
pub fn affine_apply(x: &Dyadic, slope: Slope, intercept: &Dyadic) -> Dyadic {
    let scaled = x.mul_pow2(slope.log2);
    if slope.negative {
        intercept - &scaled
    } else {
        &scaled + intercept
    }
}

/// Inverse of [`affine_apply`]: the `x` with `slope * x + intercept = y`.
pub fn affine_invert(y: &Dyadic, slope: Slope, intercept: &Dyadic) -> Dyadic {
    let shifted = y - intercept;
    let x = shifted.mul_pow2(-slope.log2);
    if slope.negative {
        -x
    } else {
        x
    }
}

/// Arithmetic used for orbits.
///
/// `Exact` never misclassifies a point against a dyadic breakpoint. `Float`
/// keeps a 64-bit mantissa window of the distance to the nearest endpoint and
/// reveals further bits of the initial point on demand; its classification
/// error is bounded by [`FLOAT_CLASSIFICATION_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    #[default]
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Float => "float",
        })
    }
}

impl FromStr for Backend {
    type Err = NumericsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Backend::Exact),
            "float" => Ok(Backend::Float),
            _ => Err(NumericsError::Parse(format!("unknown backend {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn affine_examples() {
        let half: Slope = "1/2".parse().unwrap();
        assert_eq!(affine_apply(&d("3/8"), half, &Dyadic::zero()), d("3/16"));
        let one: Slope = "1".parse().unwrap();
        assert_eq!(affine_apply(&d("5/32"), one, &Dyadic::zero()), d("5/32"));
        let quarter_neg: Slope = "-1/4".parse().unwrap();
        assert_eq!(affine_apply(&d("1/4"), quarter_neg, &Dyadic::one()), d("15/16"));
    }

    #[test]
    fn canonicalize_examples() {
        use num_bigint::BigInt;
        assert_eq!(canonicalize(BigInt::from(2), 2).to_string(), "1/2^1");
        assert_eq!(canonicalize(BigInt::from(0), 5).to_string(), "0/2^0");
        assert_eq!(canonicalize(BigInt::from(3), 2).to_string(), "3/2^2");
    }

    #[test]
    fn slope_text() {
        for s in ["2", "-2", "1/2", "-1/4", "1", "-1"] {
            assert_eq!(s.parse::<Slope>().unwrap().to_string(), s);
        }
        assert_eq!("+4".parse::<Slope>().unwrap(), Slope::new(false, 2));
        assert!("3".parse::<Slope>().is_err());
        assert!("2/4".parse::<Slope>().is_err());
        assert!("0".parse::<Slope>().is_err());
    }

    #[test]
    fn backend_text() {
        assert_eq!("EXACT".parse::<Backend>().unwrap(), Backend::Exact);
        assert_eq!(Backend::Float.to_string(), "float");
        assert!("double".parse::<Backend>().is_err());
        assert_eq!(serde_json::to_string(&Backend::Exact).unwrap(), "\"exact\"");
    }
}
