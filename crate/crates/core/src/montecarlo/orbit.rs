use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::rng::CoinSource;
use super::MonteCarloError;
use crate::maps::{Interval, NearTable, RandomMapSystem, Symbol};
use crate::numerics::float::{BitSource, FloatPoint, LazyBits, NearThreshold};
use crate::numerics::{Dyadic, DEFAULT_EXACT_ORBIT_CAP};
use crate::partition::{CellTag, PartitionScheme};

/// Law of the initial point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DensitySpec {
    #[default]
    Uniform01,
    Uniform(Interval),
}

impl DensitySpec {
    pub fn support(&self) -> Interval {
        match self {
            DensitySpec::Uniform01 => Interval::unit(),
            DensitySpec::Uniform(i) => i.clone(),
        }
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Uniform01 => f.write_str("uniform(0,1)"),
            DensitySpec::Uniform(i) => write!(f, "uniform({},{})", i.lo, i.hi),
        }
    }
}

impl FromStr for DensitySpec {
    type Err = MonteCarloError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MonteCarloError::Config(format!("bad density {s:?}; expected uniform(a,b)"));
        let inner = s.trim().strip_prefix("uniform(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let a: Dyadic = a.parse().map_err(|_| bad())?;
        let b: Dyadic = b.parse().map_err(|_| bad())?;
        if a.is_zero() && b == Dyadic::one() {
            return Ok(DensitySpec::Uniform01);
        }
        let i = Interval::new(a, b).map_err(|_| bad())?;
        if !i.is_subset_of(&Interval::unit()) {
            return Err(bad());
        }
        Ok(DensitySpec::Uniform(i))
    }
}

impl Serialize for DensitySpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DensitySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// 128-fractional-bit sample for the exact backend.
pub fn sample_initial_exact<S: BitSource>(bits: &mut S, density: &DensitySpec) -> Dyadic {
    let support = density.support();
    let w = loop {
        let w = ((bits.next_u64() as u128) << 64) | bits.next_u64() as u128;
        if w != 0 {
            break w;
        }
    };
    let v = Dyadic::new(BigInt::from(w), 128);
    &support.lo + &(&support.length() * &v)
}

/// Lazily refined sample for the fixed-window backend.
pub fn sample_initial_float<S: BitSource>(bits: &mut LazyBits<S>, density: &DensitySpec) -> Result<FloatPoint, MonteCarloError> {
    let support = density.support();
    FloatPoint::uniform(&support.lo, &support.hi, bits)
        .ok_or_else(|| MonteCarloError::FloatUnsupported(format!("density {density}")))
}

/// Which points an occupation count includes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Indicator {
    /// `x > 1/2`
    AboveHalf,
    /// `x ∈ E`, `E` a finite union of disjoint open dyadic intervals.
    InSet(Vec<Interval>),
}

impl Indicator {
    pub fn in_set(mut intervals: Vec<Interval>) -> Result<Self, MonteCarloError> {
        if intervals.is_empty() {
            return Err(MonteCarloError::Config("empty set".into()));
        }
        intervals.sort_by(|a, b| a.lo.cmp(&b.lo));
        for w in intervals.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(MonteCarloError::Config(format!("intervals {} and {} overlap", w[0], w[1])));
            }
        }
        if intervals.iter().any(|i| !i.is_subset_of(&Interval::unit())) {
            return Err(MonteCarloError::Config("set must lie in [0,1]".into()));
        }
        Ok(Indicator::InSet(intervals))
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        match self {
            Indicator::AboveHalf => *x > Dyadic::pow2(-1),
            Indicator::InSet(set) => set.iter().any(|i| i.contains(x)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Indicator::AboveHalf => "above-half".to_string(),
            Indicator::InSet(set) => format!("in-set({})", format_set(set)),
        }
    }

    pub(crate) fn compile(&self) -> Result<CompiledIndicator, MonteCarloError> {
        match self {
            Indicator::AboveHalf => Ok(CompiledIndicator::AboveHalf),
            Indicator::InSet(set) => {
                let unsupported = || MonteCarloError::FloatUnsupported(format!("set {}", format_set(set)));
                let half = Dyadic::pow2(-1);
                let one = Dyadic::one();
                let thr = |t: &Dyadic| -> Result<Option<NearThreshold>, MonteCarloError> {
                    if t.is_zero() || *t == half {
                        Ok(None)
                    } else {
                        NearThreshold::from_dyadic(t).map(Some).ok_or_else(unsupported)
                    }
                };
                let (mut left, mut right) = (Vec::new(), Vec::new());
                for i in set {
                    if i.lo < half {
                        let hi = (&i.hi).min(&half).clone();
                        left.push((thr(&i.lo)?, thr(&hi)?));
                    }
                    if i.hi > half {
                        let lo = (&i.lo).max(&half).clone();
                        right.push((thr(&(&one - &i.hi))?, thr(&(&one - &lo))?));
                    }
                }
                Ok(CompiledIndicator::Near { left, right })
            }
        }
    }
}

pub fn format_set(set: &[Interval]) -> String {
    set.iter().map(|i| format!("{},{}", i.lo, i.hi)).collect::<Vec<_>>().join(";")
}

/// Parse `"a,b;c,d"` into intervals.
pub fn parse_set(text: &str) -> Result<Vec<Interval>, MonteCarloError> {
    text.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (a, b) = part
                .split_once(',')
                .ok_or_else(|| MonteCarloError::Config(format!("interval {part:?} needs the form lo,hi")))?;
            let a: Dyadic = a.parse().map_err(|e| MonteCarloError::Config(format!("{e}")))?;
            let b: Dyadic = b.parse().map_err(|e| MonteCarloError::Config(format!("{e}")))?;
            Interval::new(a, b).map_err(|e| MonteCarloError::Config(e.to_string()))
        })
        .collect()
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Indicator {
    type Err = MonteCarloError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "above-half" {
            return Ok(Indicator::AboveHalf);
        }
        let inner = s
            .strip_prefix("in-set(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| MonteCarloError::Config(format!("unknown indicator {s:?}")))?;
        Indicator::in_set(parse_set(inner)?)
    }
}

impl Serialize for Indicator {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Indicator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Indicator in near coordinates; open bounds, `None` meaning 0 or 1/2.
#[derive(Debug, Clone)]
pub(crate) enum CompiledIndicator {
    AboveHalf,
    Near {
        left: Vec<(Option<NearThreshold>, Option<NearThreshold>)>,
        right: Vec<(Option<NearThreshold>, Option<NearThreshold>)>,
    },
}

impl CompiledIndicator {
    #[inline]
    pub(crate) fn contains(&self, p: &FloatPoint) -> bool {
        use std::cmp::Ordering::{Greater, Less};
        match self {
            CompiledIndicator::AboveHalf => p.is_right(),
            CompiledIndicator::Near { left, right } => {
                let parts = if p.is_right() { right } else { left };
                parts.iter().any(|(lo, hi)| {
                    lo.is_none_or(|t| p.cmp_near(t) == Greater) && hi.is_none_or(|t| p.cmp_near(t) == Less)
                })
            }
        }
    }
}

/// Near-coordinate step tables of both constituent maps.
#[derive(Debug, Clone, Copy)]
pub struct FloatStepper<'a> {
    tau1: &'a NearTable,
    tau2: &'a NearTable,
}

impl<'a> FloatStepper<'a> {
    pub fn new(system: &'a RandomMapSystem) -> Result<Self, MonteCarloError> {
        let unsupported = || MonteCarloError::FloatUnsupported(format!("system {}", system.name));
        Ok(Self {
            tau1: system.tau1.near_table().ok_or_else(unsupported)?,
            tau2: system.tau2.near_table().ok_or_else(unsupported)?,
        })
    }

    /// Apply the map selected by `symbol`.
    #[inline]
    pub fn step<S: BitSource>(&self, p: &mut FloatPoint, symbol: Symbol, bits: &mut LazyBits<S>) {
        let table = match symbol {
            Symbol::Tau1 => self.tau1,
            Symbol::Tau2 => self.tau2,
        };
        let segments = if p.is_right() { &table.right } else { &table.left };
        let seg = segments
            .iter()
            .find(|s| s.upper.is_none_or(|u| p.cmp_near(u) == std::cmp::Ordering::Less))
            .expect("segments cover the half interval");
        p.apply(&seg.affine, bits);
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub initial: String,
    /// FNV-1a digest of the coin sequence.
    pub coin_digest: u64,
    /// Occupation counts over `x_0, …, x_{N-1}`, one per indicator.
    pub counts: Vec<u64>,
    pub steps: usize,
    pub final_point: f64,
    pub precision_drops: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn digest_push(h: u64, s: Symbol) -> u64 {
    (h ^ (s as u64 + 1)).wrapping_mul(FNV_PRIME)
}

/// Exact orbit of `x0`; fails on a breakpoint or beyond `cap` steps.
pub fn orbit_exact<C: CoinSource>(
    system: &RandomMapSystem,
    x0: &Dyadic,
    coins: &mut C,
    n: usize,
    indicators: &[Indicator],
    cap: usize,
) -> Result<TrajectoryRecord, MonteCarloError> {
    if n > cap {
        return Err(MonteCarloError::ExactLengthCap { cap, requested: n });
    }
    let mut x = x0.clone();
    let mut counts = vec![0u64; indicators.len()];
    let mut digest = FNV_OFFSET;
    for _ in 0..n {
        for (c, ind) in counts.iter_mut().zip(indicators) {
            *c += ind.contains(&x) as u64;
        }
        let s = coins.next_symbol();
        digest = digest_push(digest, s);
        x = system.apply(s, &x)?;
    }
    Ok(TrajectoryRecord {
        initial: x0.to_string(),
        coin_digest: digest,
        counts,
        steps: n,
        final_point: x.to_f64(),
        precision_drops: 0,
    })
}

/// Fixed-window orbit from a sampled point.
pub fn orbit_float<C: CoinSource, S: BitSource>(
    system: &RandomMapSystem,
    start: FloatPoint,
    coins: &mut C,
    bits: &mut LazyBits<S>,
    n: usize,
    indicators: &[Indicator],
) -> Result<TrajectoryRecord, MonteCarloError> {
    let stepper = FloatStepper::new(system)?;
    let compiled: Vec<CompiledIndicator> = indicators.iter().map(Indicator::compile).collect::<Result<_, _>>()?;
    let drops_before = bits.precision_drops();
    let mut p = start;
    let mut counts = vec![0u64; indicators.len()];
    let mut digest = FNV_OFFSET;
    for _ in 0..n {
        for (c, ind) in counts.iter_mut().zip(&compiled) {
            *c += ind.contains(&p) as u64;
        }
        let s = coins.next_symbol();
        digest = digest_push(digest, s);
        stepper.step(&mut p, s, bits);
    }
    Ok(TrajectoryRecord {
        initial: start.revealed().to_string(),
        coin_digest: digest,
        counts,
        steps: n,
        final_point: p.to_f64(),
        precision_drops: bits.precision_drops() - drops_before,
    })
}

/// Cell tags of `x_0, …, x_n` under a given coin prefix.
pub fn itinerary(system: &RandomMapSystem, x0: &Dyadic, coins: &[Symbol], n: usize) -> Result<Vec<CellTag>, MonteCarloError> {
    if coins.len() < n {
        return Err(MonteCarloError::Config(format!("{n} steps need {n} coins, got {}", coins.len())));
    }
    if n > DEFAULT_EXACT_ORBIT_CAP {
        return Err(MonteCarloError::ExactLengthCap { cap: DEFAULT_EXACT_ORBIT_CAP, requested: n });
    }
    let scheme = PartitionScheme::for_system(system)?;
    let mut x = x0.clone();
    let mut tags = Vec::with_capacity(n + 1);
    tags.push(scheme.locate(&x)?);
    for &s in &coins[..n] {
        x = system.apply(s, &x)?;
        tags.push(scheme.locate(&x)?);
    }
    Ok(tags)
}
