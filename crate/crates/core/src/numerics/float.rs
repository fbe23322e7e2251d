//! Fixed-window backend.
//!
//! A point is stored as its side of 1/2 and its distance to the nearer
//! endpoint, `near = (m + U) * 2^r`, where `m` is a 64-bit window and
//! `U ∈ (0, 1)` is the not-yet-revealed tail of the initial point's binary
//! expansion (complemented when `flip` is set). Every builtin branch acts on
//! `near` without rounding; bits that leave the window are pushed back into a
//! 128-bit buffer in front of the bit stream, so precision is only lost when
//! that buffer overflows.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::Dyadic;

const WINDOW_LO: u64 = 1 << 52;
const WINDOW_HI: u128 = 1 << 63;
const REFILL_BITS: u32 = 62;

/// Largest intercept exponent accepted by the window arithmetic.
pub const MAX_INTERCEPT_EXPONENT: u32 = 40;
/// Largest slope exponent accepted by the window arithmetic.
pub const MAX_SLOPE_LOG2: i32 = 8;

/// Source of uniformly random bits, consumed most significant bit first.
pub trait BitSource {
    fn next_u64(&mut self) -> u64;
}

/// Bit stream with a push-back buffer.
#[derive(Debug, Clone)]
pub struct LazyBits<S> {
    source: S,
    cache: u64,
    cache_len: u32,
    buf: u128,
    buf_len: u32,
    precision_drops: u64,
}

impl<S: BitSource> LazyBits<S> {
    pub fn new(source: S) -> Self {
        Self { source, cache: 0, cache_len: 0, buf: 0, buf_len: 0, precision_drops: 0 }
    }

    /// Number of push-backs that overflowed the buffer.
    pub fn precision_drops(&self) -> u64 {
        self.precision_drops
    }

    pub fn source_mut(&mut self) -> &mut S {
        &mut self.source
    }

    fn take_stream(&mut self, k: u32) -> u64 {
        debug_assert!(k <= 64);
        if k == 0 {
            return 0;
        }
        if self.cache_len >= k {
            let out = if k == 64 { self.cache } else { self.cache >> (64 - k) };
            self.cache = if k == 64 { 0 } else { self.cache << k };
            self.cache_len -= k;
            return out;
        }
        let have = self.cache_len;
        let head = if have == 0 { 0 } else { self.cache >> (64 - have) };
        let rest = k - have;
        self.cache = self.source.next_u64();
        self.cache_len = 64;
        let tail = self.take_stream(rest);
        if rest == 64 {
            tail
        } else {
            (head << rest) | tail
        }
    }

    /// Next `k ≤ 64` bits as an integer.
    pub fn take(&mut self, k: u32) -> u64 {
        debug_assert!(k <= 64);
        if k == 0 {
            return 0;
        }
        if self.buf_len >= k {
            let out = (self.buf >> (128 - k)) as u64;
            self.buf = if k == 128 { 0 } else { self.buf << k };
            self.buf_len -= k;
            return out;
        }
        let have = self.buf_len;
        let head = if have == 0 { 0 } else { (self.buf >> (128 - have)) as u64 };
        self.buf = 0;
        self.buf_len = 0;
        let rest = k - have;
        let tail = self.take_stream(rest);
        if rest == 64 {
            tail
        } else {
            (head << rest) | tail
        }
    }

    /// Prepend the low `len ≤ 128` bits of `value`.
    pub fn push_front(&mut self, value: u128, len: u32) {
        debug_assert!(len <= 128);
        if len == 0 {
            return;
        }
        let value = if len == 128 { value } else { value & ((1u128 << len) - 1) };
        let total = self.buf_len + len;
        self.buf = if len == 128 { value } else { (value << (128 - len)) | (self.buf >> len) };
        if total > 128 {
            self.precision_drops += 1;
            self.buf_len = 128;
        } else {
            self.buf_len = total;
        }
    }

    fn push_front_repeat(&mut self, bit: bool, count: u64) {
        let mut left = count;
        while left > 0 {
            let len = left.min(128) as u32;
            let value = if bit { u128::MAX } else { 0 };
            self.push_front(value, len);
            left -= len as u64;
            if left > 0 && self.buf_len == 128 {
                // The buffer is already all `bit`; further copies only drop.
                self.precision_drops += 1;
                break;
            }
        }
    }
}

/// Fixed-point threshold `num / 2^exp` on the `near` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NearThreshold {
    pub num: u64,
    pub exp: u32,
}

impl NearThreshold {
    pub fn from_dyadic(t: &Dyadic) -> Option<Self> {
        if !t.is_positive() || t.exponent() > MAX_INTERCEPT_EXPONENT {
            return None;
        }
        Some(Self { num: t.mantissa().to_u64()?, exp: t.exponent() })
    }
}

/// `y = C + A * near` with `C = c_num / 2^c_exp` and `A = ±2^log2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NearAffine {
    pub c_num: i64,
    pub c_exp: u32,
    pub negative: bool,
    pub log2: i32,
}

impl NearAffine {
    pub fn new(c: &Dyadic, negative: bool, log2: i32) -> Option<Self> {
        if c.exponent() > MAX_INTERCEPT_EXPONENT || log2.abs() > MAX_SLOPE_LOG2 {
            return None;
        }
        Some(Self { c_num: c.mantissa().to_i64()?, c_exp: c.exponent(), negative, log2 })
    }
}

/// A point of (0, 1) with lazily revealed low bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloatPoint {
    right: bool,
    m: u64,
    r: i32,
    flip: bool,
}

fn bitlen_u128(x: u128) -> u32 {
    128 - x.leading_zeros()
}

impl FloatPoint {
    /// Uniform sample on `(lo, hi)`, `0 ≤ lo < hi ≤ 1` dyadic.
    pub fn uniform<S: BitSource>(lo: &Dyadic, hi: &Dyadic, bits: &mut LazyBits<S>) -> Option<Self> {
        let len = hi - lo;
        if !len.is_positive() || lo.is_negative() || *hi > Dyadic::one() {
            return None;
        }
        // Sample `lo + 2^q * W`, W uniform on (0,1), rejecting W ≥ len / 2^q.
        let mut q = (len.mantissa().bits() as i64 - len.exponent() as i64) as i32;
        if len.mantissa().bits() == 1 {
            q -= 1;
        }
        let ratio = len.mul_pow2(-q);
        let t = ratio.exponent().max((lo.exponent() as i32 + q).max(0) as u32).max(1);
        if t > 60 {
            return None;
        }
        let limit = (ratio.mantissa() << (t - ratio.exponent()) as usize).to_u64()?;
        loop {
            let w = bits.take(t);
            if w >= limit {
                continue;
            }
            // x = lo + (w + V) 2^{q - t}; place as the image of the unit point.
            let aff = NearAffine::new(lo, false, q - t as i32)?;
            let mut p = FloatPoint { right: false, m: w, r: 0, flip: false };
            if aff.c_exp as i32 > t as i32 - q {
                return None;
            }
            p.apply_raw(&aff, bits);
            return Some(p);
        }
    }

    pub fn is_right(&self) -> bool {
        self.right
    }

    /// `floor(log2(near))`.
    pub fn near_log2_floor(&self) -> i32 {
        63 - self.m.leading_zeros() as i32 + self.r
    }

    /// Compare `near` with a positive dyadic threshold; never equal.
    pub fn cmp_near(&self, t: NearThreshold) -> Ordering {
        let shift = -self.r - t.exp as i32;
        debug_assert!(shift >= 0);
        let lz = t.num.leading_zeros() as i32;
        if shift >= 64 + lz {
            return Ordering::Less;
        }
        let big = (t.num as u128) << shift;
        if (self.m as u128) < big {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    /// Lower end of the revealed window as an exact value.
    pub fn revealed(&self) -> Dyadic {
        let near = Dyadic::new(BigInt::from(self.m), 0).mul_pow2(self.r);
        if self.right {
            &Dyadic::one() - &near
        } else {
            near
        }
    }

    pub fn to_f64(&self) -> f64 {
        let near = libm::ldexp(self.m as f64, self.r);
        if self.right {
            1.0 - near
        } else {
            near
        }
    }

    pub fn apply<S: BitSource>(&mut self, aff: &NearAffine, bits: &mut LazyBits<S>) {
        self.apply_raw(aff, bits)
    }

    fn apply_raw<S: BitSource>(&mut self, aff: &NearAffine, bits: &mut LazyBits<S>) {
        let mut rp = self.r + aff.log2;
        let neg = aff.negative;
        let (right, big_m, toggle);
        if aff.c_num == 0 {
            debug_assert!(!neg);
            let m = self.m as i128;
            if -rp > 64 || m < (1i128 << (-rp - 1)) {
                (right, big_m, toggle) = (false, m, false);
            } else {
                (right, big_m, toggle) = (true, (1i128 << -rp) - m - 1, true);
            }
        } else if aff.c_num == 1 && aff.c_exp == 0 {
            debug_assert!(neg);
            let m = self.m as i128;
            if -rp > 64 || m < (1i128 << (-rp - 1)) {
                (right, big_m, toggle) = (true, m, false);
            } else {
                (right, big_m, toggle) = (false, (1i128 << -rp) - m - 1, true);
            }
        } else {
            if -rp > 125 {
                let target = -(aff.c_exp as i32) - 62;
                let s = (target - rp) as u64;
                self.coarsen(s, bits);
                rp = target;
            }
            let m = self.m as i128;
            let y0 = ((aff.c_num as i128) << (-rp - aff.c_exp as i32)) + if neg { -m } else { m };
            let half = 1i128 << (-rp - 1);
            let one = 1i128 << -rp;
            if !neg {
                if y0 < half {
                    (right, big_m, toggle) = (false, y0, false);
                } else {
                    (right, big_m, toggle) = (true, one - y0 - 1, true);
                }
            } else if y0 <= half {
                (right, big_m, toggle) = (false, y0 - 1, true);
            } else {
                (right, big_m, toggle) = (true, one - y0, false);
            }
        }
        debug_assert!(big_m >= 0, "branch image left the unit interval");
        self.right = right;
        self.flip ^= toggle;
        self.normalize(big_m.max(0) as u128, rp, bits);
    }

    /// Shift the window `s` bits coarser, pushing dropped bits back.
    fn coarsen<S: BitSource>(&mut self, s: u64, bits: &mut LazyBits<S>) {
        let m = self.m as u128;
        if s <= 128 {
            let low = if s == 128 { m } else { m & ((1u128 << s) - 1) };
            let v = if self.flip { !low } else { low };
            bits.push_front(v, s as u32);
            self.m = if s >= 64 { 0 } else { (m >> s) as u64 };
        } else {
            let v = if self.flip { !m } else { m };
            bits.push_front(v, 128);
            bits.push_front_repeat(self.flip, s - 128);
            self.m = 0;
        }
        self.r += s as i32;
    }

    fn normalize<S: BitSource>(&mut self, big_m: u128, r: i32, bits: &mut LazyBits<S>) {
        let mut m = big_m;
        let mut r = r;
        if m >= WINDOW_HI {
            let s = bitlen_u128(m) - 63;
            let low = m & ((1u128 << s) - 1);
            let v = if self.flip { !low } else { low };
            bits.push_front(v, s);
            m >>= s;
            r += s as i32;
        }
        let mut m = m as u64;
        while m < WINDOW_LO {
            let k = REFILL_BITS - (64 - m.leading_zeros());
            let mut b = bits.take(k);
            if self.flip {
                b ^= (1u64 << k) - 1;
            }
            m = (m << k) | b;
            r -= k as i32;
        }
        self.m = m;
        self.r = r;
    }
}

/// Bits of a fixed dyadic fraction in (0, 1), followed by zeros.
#[derive(Debug, Clone)]
pub struct DyadicBits {
    words: Vec<u64>,
    next: usize,
}

impl DyadicBits {
    pub fn new(x: &Dyadic) -> Self {
        let e = x.exponent() as usize;
        let padded = e.div_ceil(64) * 64;
        let scaled: BigInt = x.mantissa() << (padded - e);
        let (_, mut digits) = scaled.to_u64_digits();
        digits.resize(padded / 64, 0);
        digits.reverse();
        Self { words: digits, next: 0 }
    }
}

impl BitSource for DyadicBits {
    fn next_u64(&mut self) -> u64 {
        let w = self.words.get(self.next).copied().unwrap_or(0);
        self.next += 1;
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Counter(u64);
    impl BitSource for Counter {
        fn next_u64(&mut self) -> u64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            self.0
        }
    }

    #[test]
    fn take_and_push_roundtrip() {
        let mut a = LazyBits::new(Counter(7));
        let mut b = LazyBits::new(Counter(7));
        let x = a.take(40);
        let y = a.take(64);
        a.push_front(y as u128, 64);
        a.push_front(x as u128, 40);
        assert_eq!(a.take(64), b.take(64));
        assert_eq!(a.take(33), b.take(33));
        assert_eq!(a.take(64), b.take(64));
        assert_eq!(a.precision_drops(), 0);
    }

    #[test]
    fn buffer_overflow_is_counted() {
        let mut a = LazyBits::new(Counter(1));
        a.push_front(u128::MAX, 100);
        a.push_front(0, 40);
        assert_eq!(a.precision_drops(), 1);
        assert_eq!(a.take(40), 0);
    }

    #[test]
    fn dyadic_bits_layout() {
        let x: Dyadic = "3/2^2".parse().unwrap();
        let mut s = DyadicBits::new(&x);
        assert_eq!(s.next_u64(), 0xC000_0000_0000_0000);
        assert_eq!(s.next_u64(), 0);
        let y = Dyadic::new(BigInt::from(1), 70);
        let mut s = DyadicBits::new(&y);
        assert_eq!(s.next_u64(), 0);
        assert_eq!(s.next_u64(), 1u64 << 58);
    }

    #[test]
    fn uniform_reproduces_source_bits() {
        let x: Dyadic = "5/2^4".parse().unwrap();
        let mut bits = LazyBits::new(DyadicBits::new(&x));
        let p = FloatPoint::uniform(&Dyadic::zero(), &Dyadic::one(), &mut bits).unwrap();
        assert_eq!(p.revealed(), x);
        assert!(!p.is_right());
        let y: Dyadic = "13/2^4".parse().unwrap();
        let mut bits = LazyBits::new(DyadicBits::new(&y));
        let p = FloatPoint::uniform(&Dyadic::zero(), &Dyadic::one(), &mut bits).unwrap();
        assert!(p.is_right());
        // Right-side windows are complemented: the revealed value is an upper bound here.
        let gap = &p.revealed() - &y;
        assert!(!gap.is_negative() && gap < Dyadic::pow2(-60));
    }

    #[test]
    fn uniform_on_subinterval() {
        let lo: Dyadic = "1/4".parse().unwrap();
        let hi: Dyadic = "3/4".parse().unwrap();
        let mut bits = LazyBits::new(Counter(3));
        for _ in 0..1000 {
            let p = FloatPoint::uniform(&lo, &hi, &mut bits).unwrap();
            let v = p.to_f64();
            assert!(v > 0.25 && v < 0.75);
        }
        let lo: Dyadic = "1/8".parse().unwrap();
        let hi: Dyadic = "1/2".parse().unwrap();
        for _ in 0..1000 {
            let p = FloatPoint::uniform(&lo, &hi, &mut bits).unwrap();
            let v = p.to_f64();
            assert!(v > 0.125 && v < 0.5);
        }
    }

    #[test]
    fn threshold_comparison() {
        let x: Dyadic = "3/16".parse().unwrap();
        let mut bits = LazyBits::new(DyadicBits::new(&x));
        let p = FloatPoint::uniform(&Dyadic::zero(), &Dyadic::one(), &mut bits).unwrap();
        let quarter = NearThreshold { num: 1, exp: 2 };
        let eighth = NearThreshold { num: 1, exp: 3 };
        assert_eq!(p.cmp_near(quarter), Ordering::Less);
        assert_eq!(p.cmp_near(eighth), Ordering::Greater);
        assert_eq!(p.near_log2_floor(), -3);
    }
}
