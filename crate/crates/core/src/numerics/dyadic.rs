use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{NumericsError, Rational};

/// An exact rational of the form `mantissa / 2^exponent`.
///
/// Values are always kept canonical: either the exponent is zero or the
/// mantissa is odd. Addition, negation, multiplication and scaling by powers
/// of two never round.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: u32,
}

impl Dyadic {
    pub fn new(mantissa: impl Into<BigInt>, exponent: u32) -> Self {
        canonical_parts(mantissa.into(), exponent)
    }

    pub fn zero() -> Self {
        Self { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Self { mantissa: BigInt::one(), exponent: 0 }
    }

    pub fn from_int(value: i64) -> Self {
        Self { mantissa: BigInt::from(value), exponent: 0 }
    }

    /// `2^j` for any integer `j`.
    pub fn pow2(j: i32) -> Self {
        if j >= 0 {
            Self { mantissa: BigInt::one() << j as usize, exponent: 0 }
        } else {
            Self { mantissa: BigInt::one(), exponent: j.unsigned_abs() }
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn is_canonical(&self) -> bool {
        self.exponent == 0 || self.mantissa.is_odd()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    /// Exact multiplication by `2^j`.
    pub fn mul_pow2(&self, j: i32) -> Self {
        if self.mantissa.is_zero() {
            return Self::zero();
        }
        if j >= 0 {
            let j = j as u32;
            if j <= self.exponent {
                Self { mantissa: self.mantissa.clone(), exponent: self.exponent - j }
            } else {
                Self {
                    mantissa: &self.mantissa << (j - self.exponent) as usize,
                    exponent: 0,
                }
            }
        } else {
            // Dividing an odd mantissa (or an integer) by 2^|j|: the result is
            // canonical unless the value was an even integer.
            canonical_parts(self.mantissa.clone(), self.exponent + j.unsigned_abs())
        }
    }

    pub fn abs(&self) -> Self {
        Self { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.mantissa.clone(), BigInt::one() << self.exponent as usize)
    }

    /// Nearest-ish `f64`: the mantissa is first truncated to 64 significant
    /// bits, then scaled exactly.
    pub fn to_f64(&self) -> f64 {
        let bits = self.mantissa.bits();
        let (m, shift) = if bits > 64 {
            let s = bits - 64;
            (&self.mantissa >> s as usize, s as i64)
        } else {
            (self.mantissa.clone(), 0)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        let e = shift - self.exponent as i64;
        libm::ldexp(m, e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        let m = if negative { -BigInt::from(m) } else { BigInt::from(m) };
        Some(Self::new(m, 0).mul_pow2(e))
    }

    /// The least `e` such that `self * 2^e` is an integer.
    pub fn denominator_log2(&self) -> u32 {
        self.exponent
    }

    /// Integer floor of the value.
    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&(BigInt::one() << self.exponent as usize))
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let e = self.exponent.max(other.exponent);
        let a = &self.mantissa << (e - self.exponent) as usize;
        let b = &other.mantissa << (e - other.exponent) as usize;
        (a, b, e)
    }
}

fn canonical_parts(mantissa: BigInt, exponent: u32) -> Dyadic {
    if mantissa.is_zero() {
        return Dyadic::zero();
    }
    let tz = mantissa.trailing_zeros().unwrap_or(0);
    let shift = tz.min(exponent as u64) as u32;
    Dyadic { mantissa: mantissa >> shift as usize, exponent: exponent - shift }
}

/// Restores the canonical invariant without changing the value.
pub fn canonicalize(mantissa: BigInt, exponent: u32) -> Dyadic {
    canonical_parts(mantissa, exponent)
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        canonical_parts(a + b, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        canonical_parts(a - b, e)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        canonical_parts(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -&self.mantissa, exponent: self.exponent }
    }
}

macro_rules! forward_owned {
    ($($tr:ident :: $m:ident),*) => {$(
        impl $tr for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic { (&self).$m(&rhs) }
        }
        impl $tr<&Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: &Dyadic) -> Dyadic { (&self).$m(rhs) }
        }
        impl $tr<Dyadic> for &Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add::add, Sub::sub, Mul::mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.mantissa, self.exponent)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Dyadic {
    type Err = NumericsError;

    /// Accepts `m/2^e`, a plain integer `m`, or `m/d` with `d` a power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NumericsError::Parse(format!("not a dyadic rational: {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            None => s.parse::<BigInt>().map(|m| Dyadic::new(m, 0)).map_err(|_| bad()),
            Some((num, den)) => {
                let m: BigInt = num.trim().parse().map_err(|_| bad())?;
                let den = den.trim();
                if let Some(e) = den.strip_prefix("2^") {
                    let e: u32 = e.parse().map_err(|_| bad())?;
                    Ok(Dyadic::new(m, e))
                } else {
                    let d: BigInt = den.parse().map_err(|_| bad())?;
                    if !d.is_positive() || d.magnitude().count_ones() != 1 {
                        return Err(bad());
                    }
                    let e = d.trailing_zeros().unwrap_or(0) as u32;
                    Ok(Dyadic::new(m, e))
                }
            }
        }
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_forms() {
        let x = Dyadic::new(2, 2);
        assert_eq!((x.mantissa().clone(), x.exponent()), (BigInt::from(1), 1));
        let z = Dyadic::new(0, 5);
        assert_eq!((z.mantissa().clone(), z.exponent()), (BigInt::from(0), 0));
        let y = Dyadic::new(3, 2);
        assert_eq!((y.mantissa().clone(), y.exponent()), (BigInt::from(3), 2));
        assert!(Dyadic::new(-12, 1).is_canonical());
        assert_eq!(Dyadic::new(-12, 1), Dyadic::from_int(-6));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(d("3/2^3").to_string(), "3/2^3");
        assert_eq!(d("6/2^4"), d("3/8"));
        assert_eq!(d("-1/4").to_string(), "-1/2^2");
        assert_eq!(d("5"), Dyadic::from_int(5));
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("x/2^3".parse::<Dyadic>().is_err());
        assert!("1/0".parse::<Dyadic>().is_err());
    }

    #[test]
    fn arithmetic_is_exact() {
        assert_eq!(d("3/8") + d("5/8"), Dyadic::one());
        assert_eq!(d("1/2") - d("3/4"), d("-1/4"));
        assert_eq!(d("3/4") * d("1/2"), d("3/8"));
        assert_eq!(d("3/8").mul_pow2(-1), d("3/16"));
        assert_eq!(d("3/8").mul_pow2(3), Dyadic::from_int(3));
        assert_eq!(d("3/8").mul_pow2(5), Dyadic::from_int(12));
        assert_eq!(Dyadic::from_int(12).mul_pow2(-3), d("3/2"));
        assert_eq!(Dyadic::pow2(-3), d("1/8"));
        assert_eq!(Dyadic::pow2(2), Dyadic::from_int(4));
    }

    #[test]
    fn ordering() {
        assert!(d("3/16") < d("1/4"));
        assert!(d("-1/2") < d("1/1024"));
        assert_eq!(d("2/4").cmp(&d("1/2")), Ordering::Equal);
    }

    #[test]
    fn f64_roundtrip() {
        for x in [0.0, 0.5, 0.1, -3.75, 1e-300, 5e-324, 123456.789] {
            let dy = Dyadic::from_f64(x).unwrap();
            assert_eq!(dy.to_f64(), x);
        }
        assert!(Dyadic::from_f64(f64::NAN).is_none());
        assert_eq!(Dyadic::pow2(-2000).to_f64(), 0.0);
    }

    #[test]
    fn floor_of_negative() {
        assert_eq!(d("-1/4").floor(), BigInt::from(-1));
        assert_eq!(d("7/4").floor(), BigInt::from(1));
    }
}
