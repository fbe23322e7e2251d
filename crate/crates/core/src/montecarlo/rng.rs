use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::maps::Symbol;
use crate::numerics::float::BitSource;
use crate::numerics::Rational;

/// Independent uses of one trajectory's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Coins = 0,
    PointBits = 1,
    Initial = 2,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `(seed, stream id)` addressed ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub id: u64,
}

impl RngStream {
    pub fn new(seed: u64, id: u64) -> Self {
        Self { seed, id }
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut state = self.seed ^ (purpose as u64).wrapping_mul(0xd6e8_feb8_6659_fd93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.id);
        rng
    }

    pub fn coins(&self, p: &Rational) -> RandomCoins {
        RandomCoins::new(self.rng(Purpose::Coins), p)
    }

    pub fn bits(&self) -> RngBits {
        RngBits(self.rng(Purpose::PointBits))
    }
}

/// Raw ChaCha output as a bit source.
#[derive(Debug, Clone)]
pub struct RngBits(pub ChaCha8Rng);

impl BitSource for RngBits {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Supplies the map index for each step.
pub trait CoinSource {
    fn next_symbol(&mut self) -> Symbol;
}

/// Exact Bernoulli(p) coins, one 64-bit draw per step (plus rare rejections).
#[derive(Debug, Clone)]
pub struct RandomCoins {
    rng: ChaCha8Rng,
    num: u64,
    den: u64,
    zone: u128,
}

impl RandomCoins {
    pub fn new(rng: ChaCha8Rng, p: &Rational) -> Self {
        use num_traits::ToPrimitive;
        let num = p.numer().to_u64().expect("p numerator fits in 64 bits");
        let den = p.denom().to_u64().expect("p denominator fits in 64 bits");
        let zone = ((1u128 << 64) / den as u128) * den as u128;
        Self { rng, num, den, zone }
    }
}

impl CoinSource for RandomCoins {
    #[inline]
    fn next_symbol(&mut self) -> Symbol {
        loop {
            let u = self.rng.next_u64();
            if (u as u128) < self.zone {
                return if u % self.den < self.num { Symbol::Tau1 } else { Symbol::Tau2 };
            }
        }
    }
}

/// A fixed coin sequence; panics when exhausted.
#[derive(Debug, Clone)]
pub struct ForcedCoins<'a> {
    seq: &'a [Symbol],
    pos: usize,
}

impl<'a> ForcedCoins<'a> {
    pub fn new(seq: &'a [Symbol]) -> Self {
        Self { seq, pos: 0 }
    }
}

impl CoinSource for ForcedCoins<'_> {
    fn next_symbol(&mut self) -> Symbol {
        let s = self.seq[self.pos];
        self.pos += 1;
        s
    }
}

/// Records every symbol drawn from an inner source.
pub struct Recording<'a, C> {
    pub inner: &'a mut C,
    pub log: Vec<Symbol>,
}

impl<C: CoinSource> CoinSource for Recording<'_, C> {
    fn next_symbol(&mut self) -> Symbol {
        let s = self.inner.next_symbol();
        self.log.push(s);
        s
    }
}
