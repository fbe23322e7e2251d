//! The λ-partitions, point location and exact transition probabilities.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::maps::{Interval, RandomMapSystem, Symbol, SystemKind};
use crate::numerics::float::FloatPoint;
use crate::numerics::{rat, Dyadic, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("tag {0} is not a cell of this partition")]
    InvalidTag(CellTag),
    #[error("point {0} lies on a cell boundary")]
    BoundaryPoint(Dyadic),
    #[error("point {0} lies outside (0,1)")]
    OutOfDomain(Dyadic),
    #[error("operation requires the {expected} system, got {got}")]
    WrongSystem { expected: SystemKind, got: SystemKind },
    #[error("custom systems have no partition")]
    Custom,
}

/// Name of a partition cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellTag {
    /// `(2^{-k-2}, 2^{-k-1})`
    Minus(u32),
    /// `(1 - 2^{-k-1}, 1 - 2^{-k-2})`
    Plus(u32),
    /// `(2^{-k-1}, 2^{-k})`
    Single(u32),
    /// `Single(k)` labelled with the map applied next.
    Refined(u32, Symbol),
}

impl CellTag {
    pub fn index(&self) -> u32 {
        match *self {
            CellTag::Minus(k) | CellTag::Plus(k) | CellTag::Single(k) | CellTag::Refined(k, _) => k,
        }
    }

    /// Position in the interleaved enumeration order.
    pub fn order_key(&self) -> (u32, u8) {
        match *self {
            CellTag::Minus(k) => (k, 0),
            CellTag::Plus(k) => (k, 1),
            CellTag::Single(k) => (k, 0),
            CellTag::Refined(k, Symbol::Tau1) => (k, 0),
            CellTag::Refined(k, Symbol::Tau2) => (k, 1),
        }
    }

    /// The unrefined cell underneath.
    pub fn base(&self) -> CellTag {
        match *self {
            CellTag::Refined(k, _) => CellTag::Single(k),
            other => other,
        }
    }
}

impl PartialOrd for CellTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.order_key(), self.family()).cmp(&(other.order_key(), other.family()))
    }
}

impl CellTag {
    fn family(&self) -> u8 {
        match self {
            CellTag::Minus(_) => 0,
            CellTag::Plus(_) => 1,
            CellTag::Single(_) => 2,
            CellTag::Refined(..) => 3,
        }
    }
}

impl fmt::Display for CellTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellTag::Minus(k) => write!(f, "Minus({k})"),
            CellTag::Plus(k) => write!(f, "Plus({k})"),
            CellTag::Single(k) => write!(f, "Single({k})"),
            CellTag::Refined(k, s) => write!(f, "Refined(Single({k}),{s})"),
        }
    }
}

/// Cell family a geometric tail runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TailSide {
    Minus,
    Plus,
    Single,
}

impl TailSide {
    pub fn tag(&self, k: u32) -> CellTag {
        match self {
            TailSide::Minus => CellTag::Minus(k),
            TailSide::Plus => CellTag::Plus(k),
            TailSide::Single => CellTag::Single(k),
        }
    }
}

/// Entries `lead * (1/2)^(j - first)` for every `j ≥ first`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricTail {
    pub side: TailSide,
    pub first: u32,
    pub lead: Rational,
}

impl GeometricTail {
    pub fn ratio(&self) -> Rational {
        rat(1, 2)
    }

    pub fn prob(&self, j: u32) -> Rational {
        if j < self.first {
            return Rational::zero();
        }
        &self.lead / Rational::from_integer(num_bigint::BigInt::one() << (j - self.first) as usize)
    }

    pub fn total(&self) -> Rational {
        &self.lead * rat(2, 1)
    }

    pub fn label(&self) -> String {
        format!("tail({:?}(j>={}))", self.side, self.first)
    }
}

/// All nonzero `q(s, ·)`: finitely many explicit entries plus geometric tails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRow {
    pub from: CellTag,
    pub entries: Vec<(CellTag, Rational)>,
    pub tails: Vec<GeometricTail>,
}

impl TransitionRow {
    pub fn prob(&self, t: CellTag) -> Rational {
        let explicit: Rational = self.entries.iter().filter(|(tag, _)| *tag == t).map(|(_, q)| q.clone()).sum();
        let tail: Rational =
            self.tails.iter().filter(|tl| tl.side.tag(t.index()) == t).map(|tl| tl.prob(t.index())).sum();
        explicit + tail
    }

    pub fn total(&self) -> Rational {
        let explicit: Rational = self.entries.iter().map(|(_, q)| q.clone()).sum();
        let tail: Rational = self.tails.iter().map(GeometricTail::total).sum();
        explicit + tail
    }

    /// Targets with nonzero probability and index at most `k_max`.
    pub fn support_upto(&self, k_max: u32) -> Vec<(CellTag, Rational)> {
        let mut out: BTreeMap<CellTag, Rational> = BTreeMap::new();
        for (t, q) in &self.entries {
            if t.index() <= k_max {
                *out.entry(*t).or_insert_with(Rational::zero) += q;
            }
        }
        for tl in &self.tails {
            for j in tl.first..=k_max {
                *out.entry(tl.side.tag(j)).or_insert_with(Rational::zero) += tl.prob(j);
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sidedness {
    TwoSided,
    OneSided,
}

/// Deepest cell the partition describes; its endpoints have about a million bits.
pub const MAX_CELL_INDEX: u32 = 1 << 20;

/// Partition family attached to one builtin system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionScheme {
    pub kind: SystemKind,
    pub sidedness: Sidedness,
}

fn pow2(j: i32) -> Dyadic {
    Dyadic::pow2(j)
}

impl PartitionScheme {
    pub fn for_kind(kind: SystemKind) -> Result<Self, PartitionError> {
        let sidedness = match kind {
            SystemKind::Hata | SystemKind::Mbgi => Sidedness::TwoSided,
            SystemKind::Pelikan => Sidedness::OneSided,
            SystemKind::Custom => return Err(PartitionError::Custom),
        };
        Ok(Self { kind, sidedness })
    }

    pub fn for_system(system: &RandomMapSystem) -> Result<Self, PartitionError> {
        Self::for_kind(system.kind)
    }

    fn check(&self, tag: CellTag) -> Result<(), PartitionError> {
        let ok = matches!(
            (self.sidedness, tag),
            (Sidedness::TwoSided, CellTag::Minus(_) | CellTag::Plus(_))
                | (Sidedness::OneSided, CellTag::Single(_) | CellTag::Refined(..))
        );
        let in_range = tag.index() <= MAX_CELL_INDEX;
        if ok && in_range {
            Ok(())
        } else {
            Err(PartitionError::InvalidTag(tag))
        }
    }

    pub fn cell_interval(&self, tag: CellTag) -> Result<Interval, PartitionError> {
        self.check(tag)?;
        let k = tag.index() as i32;
        let one = Dyadic::one();
        Ok(match tag.base() {
            CellTag::Minus(_) => Interval { lo: pow2(-k - 2), hi: pow2(-k - 1) },
            CellTag::Plus(_) => Interval { lo: &one - &pow2(-k - 1), hi: &one - &pow2(-k - 2) },
            _ => Interval { lo: pow2(-k - 1), hi: pow2(-k) },
        })
    }

    /// Cells in enumeration order with index at most `k_max`.
    pub fn tags(&self, k_max: u32) -> Vec<CellTag> {
        match self.sidedness {
            Sidedness::TwoSided => (0..=k_max).flat_map(|k| [CellTag::Minus(k), CellTag::Plus(k)]).collect(),
            Sidedness::OneSided => (0..=k_max).map(CellTag::Single).collect(),
        }
    }

    pub fn locate(&self, x: &Dyadic) -> Result<CellTag, PartitionError> {
        if !Interval::unit().contains(x) {
            return Err(PartitionError::OutOfDomain(x.clone()));
        }
        let half = pow2(-1);
        if *x == half {
            return Err(PartitionError::BoundaryPoint(x.clone()));
        }
        let right = *x > half;
        if right && self.sidedness == Sidedness::OneSided {
            return Ok(CellTag::Single(0));
        }
        let near = if right { &Dyadic::one() - x } else { x.clone() };
        if near.mantissa().bits() == 1 {
            return Err(PartitionError::BoundaryPoint(x.clone()));
        }
        let floor = near.mantissa().bits() as i64 - 1 - near.exponent() as i64;
        Ok(self.tag_from_floor(right, floor as i32))
    }

    /// Location of a fixed-window point; exact given its revealed bits.
    pub fn locate_float(&self, x: &FloatPoint) -> CellTag {
        self.tag_from_floor(x.is_right(), x.near_log2_floor())
    }

    #[inline]
    fn tag_from_floor(&self, right: bool, floor: i32) -> CellTag {
        match self.sidedness {
            Sidedness::TwoSided => {
                let k = (-floor - 2) as u32;
                if right {
                    CellTag::Plus(k)
                } else {
                    CellTag::Minus(k)
                }
            }
            Sidedness::OneSided => {
                if right {
                    CellTag::Single(0)
                } else {
                    CellTag::Single((-floor - 1) as u32)
                }
            }
        }
    }

    /// `q(s,t)` from the preimages `s ∩ τ^{-1} t`.
    pub fn transition_prob(&self, system: &RandomMapSystem, s: CellTag, t: CellTag) -> Result<Rational, PartitionError> {
        self.check_system(system)?;
        let cs = self.cell_interval(s.base())?;
        let ct = self.cell_interval(t.base())?;
        let mut total = Rational::zero();
        for symbol in [Symbol::Tau1, Symbol::Tau2] {
            total += system.prob(symbol) * preimage_measure(system, symbol, &cs, &ct);
        }
        Ok(total / cs.length().to_rational())
    }

    /// `q(s, ·)` from the branch images of `s`. Geometric tails start no
    /// earlier than `k_max + 1`; finitely supported entries stay explicit.
    pub fn transition_row(&self, system: &RandomMapSystem, s: CellTag, k_max: u32) -> Result<TransitionRow, PartitionError> {
        self.check_system(system)?;
        let cs = self.cell_interval(s.base())?;
        let len_s = cs.length().to_rational();
        let mut acc = RowAccumulator::default();
        for symbol in [Symbol::Tau1, Symbol::Tau2] {
            let w = system.prob(symbol);
            for b in system.map(symbol).branches() {
                let Some(piece) = b.domain.intersect(&cs) else { continue };
                let (a, c) = (b.apply(&piece.lo), b.apply(&piece.hi));
                let image = if a < c { Interval { lo: a, hi: c } } else { Interval { lo: c, hi: a } };
                let weight = &w * piece.length().to_rational() / &len_s;
                self.spread(&image, weight, &mut acc);
            }
        }
        Ok(acc.finish(s, k_max))
    }

    /// Adds `weight * λ(image ∩ t) / λ(image)` for every cell `t`.
    fn spread(&self, image: &Interval, weight: Rational, acc: &mut RowAccumulator) {
        let scale = weight / image.length().to_rational();
        let half = pow2(-1);
        let one = Dyadic::one();
        let left = image.intersect(&Interval { lo: Dyadic::zero(), hi: half.clone() });
        let right = image.intersect(&Interval { lo: half.clone(), hi: one.clone() });
        let (left_side, left_start, right_side) = match self.sidedness {
            Sidedness::TwoSided => (TailSide::Minus, 0, Some(TailSide::Plus)),
            Sidedness::OneSided => (TailSide::Single, 1, None),
        };
        if let Some(l) = left {
            self.spread_side(l.lo, l.hi, left_side, left_start, &scale, acc);
        }
        if let Some(r) = right {
            match right_side {
                Some(side) => self.spread_side(&one - &r.hi, &one - &r.lo, side, 0, &scale, acc),
                None => acc.add(CellTag::Single(0), &scale * r.length().to_rational()),
            }
        }
    }

    /// Spread over cells `(2^{-k-off-1}, 2^{-k-off})` of the near coordinate
    /// meeting `(a, b)`, where `off` is 1 for two-sided cells.
    fn spread_side(&self, a: Dyadic, b: Dyadic, side: TailSide, start: u32, scale: &Rational, acc: &mut RowAccumulator) {
        let off = if self.sidedness == Sidedness::TwoSided { 1 } else { 0 };
        let mut k = start;
        loop {
            let lo = pow2(-(k as i32) - off - 1);
            let hi = pow2(-(k as i32) - off);
            if hi <= a {
                break;
            }
            if a.is_zero() && hi <= b {
                acc.add_tail(side, k, scale * (&hi - &lo).to_rational());
                break;
            }
            if let Some(cut) = (Interval { lo: lo.clone(), hi }).intersect(&Interval { lo: a.clone(), hi: b.clone() }) {
                acc.add(side.tag(k), scale * cut.length().to_rational());
            }
            k += 1;
        }
    }

    /// `p̃*(s^{χ1}, t^{χ2}) = P(χ2) λ(s ∩ χ1^{-1} t) / λ(s)` on the refined
    /// Pelikan partition.
    pub fn refined_transition(&self, system: &RandomMapSystem, s: CellTag, t: CellTag) -> Result<Rational, PartitionError> {
        if system.kind != SystemKind::Pelikan {
            return Err(PartitionError::WrongSystem { expected: SystemKind::Pelikan, got: system.kind });
        }
        let (CellTag::Refined(_, chi1), CellTag::Refined(_, chi2)) = (s, t) else {
            return Err(PartitionError::InvalidTag(if matches!(s, CellTag::Refined(..)) { t } else { s }));
        };
        let cs = self.cell_interval(s.base())?;
        let ct = self.cell_interval(t.base())?;
        let mass = preimage_measure(system, chi1, &cs, &ct);
        Ok(system.prob(chi2) * mass / cs.length().to_rational())
    }

    fn check_system(&self, system: &RandomMapSystem) -> Result<(), PartitionError> {
        if system.kind != self.kind {
            return Err(PartitionError::WrongSystem { expected: self.kind, got: system.kind });
        }
        Ok(())
    }
}

/// `λ(s ∩ τ^{-1} t)`.
fn preimage_measure(system: &RandomMapSystem, symbol: Symbol, s: &Interval, t: &Interval) -> Rational {
    system
        .map(symbol)
        .branches()
        .iter()
        .filter_map(|b| b.preimage(t))
        .filter_map(|pre| pre.intersect(s))
        .map(|cut| cut.length().to_rational())
        .sum()
}

#[derive(Default)]
struct RowAccumulator {
    entries: BTreeMap<CellTag, Rational>,
    tails: BTreeMap<TailSide, (u32, Rational)>,
}

impl RowAccumulator {
    fn add(&mut self, t: CellTag, q: Rational) {
        if !q.is_zero() {
            *self.entries.entry(t).or_insert_with(Rational::zero) += q;
        }
    }

    fn add_tail(&mut self, side: TailSide, first: u32, lead: Rational) {
        let incoming = GeometricTail { side, first, lead };
        match self.tails.remove(&side) {
            None => {
                self.tails.insert(side, (incoming.first, incoming.lead));
            }
            Some((f0, l0)) => {
                let existing = GeometricTail { side, first: f0, lead: l0 };
                let start = f0.max(first);
                for tl in [&existing, &incoming] {
                    for j in tl.first..start {
                        self.add(side.tag(j), tl.prob(j));
                    }
                }
                self.tails.insert(side, (start, existing.prob(start) + incoming.prob(start)));
            }
        }
    }

    fn finish(mut self, from: CellTag, k_max: u32) -> TransitionRow {
        let mut tails = Vec::new();
        for (side, (first, lead)) in std::mem::take(&mut self.tails) {
            let tl = GeometricTail { side, first, lead };
            let start = first.max(k_max + 1);
            for j in first..start {
                self.add(side.tag(j), tl.prob(j));
            }
            tails.push(GeometricTail { side, first: start, lead: tl.prob(start) });
        }
        TransitionRow { from, entries: self.entries.into_iter().collect(), tails }
    }
}
