//! Affine branches, piecewise-linear maps and the builtin random systems.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::float::{NearAffine, NearThreshold};
use crate::numerics::{affine_apply, affine_invert, rat, Dyadic, Rational, Slope};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("unknown system {0:?} (expected hata, pelikan or mbgi)")]
    UnknownSystem(String),
    #[error("point {0} is a branch endpoint")]
    BreakpointHit(Dyadic),
    #[error("point {0} lies outside (0,1)")]
    OutOfDomain(Dyadic),
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("branch table: {0}")]
    Table(String),
}

/// Open interval `(lo, hi)` with dyadic endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[Dyadic; 2]", try_from = "[Dyadic; 2]")]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Result<Self, MapError> {
        if lo >= hi {
            return Err(MapError::Invalid(format!("degenerate interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: Dyadic::zero(), hi: Dyadic::one() }
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        &self.lo < x && x < &self.hi
    }

    pub fn length(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    /// Intersection, `None` when empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl From<Interval> for [Dyadic; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl TryFrom<[Dyadic; 2]> for Interval {
    type Error = MapError;
    fn try_from([lo, hi]: [Dyadic; 2]) -> Result<Self, Self::Error> {
        Interval::new(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// `x ↦ slope * x + intercept` on an open domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub domain: Interval,
    pub slope: Slope,
    pub intercept: Dyadic,
}

impl Branch {
    pub fn new(domain: Interval, slope: Slope, intercept: Dyadic) -> Self {
        Self { domain, slope, intercept }
    }

    /// Apply the affine formula; the caller is responsible for the domain.
    pub fn apply(&self, x: &Dyadic) -> Dyadic {
        affine_apply(x, self.slope, &self.intercept)
    }

    pub fn invert(&self, y: &Dyadic) -> Dyadic {
        affine_invert(y, self.slope, &self.intercept)
    }

    pub fn image(&self) -> Interval {
        let a = self.apply(&self.domain.lo);
        let b = self.apply(&self.domain.hi);
        if self.slope.negative {
            Interval { lo: b, hi: a }
        } else {
            Interval { lo: a, hi: b }
        }
    }

    /// `{x ∈ domain : branch(x) ∈ target}`, `None` when empty.
    pub fn preimage(&self, target: &Interval) -> Option<Interval> {
        let hit = self.image().intersect(target)?;
        let a = self.invert(&hit.lo);
        let b = self.invert(&hit.hi);
        Some(if self.slope.negative { Interval { lo: b, hi: a } } else { Interval { lo: a, hi: b } })
    }

    /// Affine form acting on the distance to the nearer endpoint.
    fn near_affine(&self, right: bool) -> Option<NearAffine> {
        let a = self.slope.as_dyadic();
        if right {
            // x = 1 - near: y = (a + b) - a * near
            NearAffine::new(&(&a + &self.intercept), !self.slope.negative, self.slope.log2)
        } else {
            NearAffine::new(&self.intercept, self.slope.negative, self.slope.log2)
        }
    }
}

/// One segment of the near-coordinate lookup table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NearSegment {
    /// Exclusive upper end in near coordinates; `None` means up to 1/2.
    pub upper: Option<NearThreshold>,
    pub branch: usize,
    pub affine: NearAffine,
}

/// Lookup tables used by the fixed-window backend, one per side of 1/2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearTable {
    pub left: Vec<NearSegment>,
    pub right: Vec<NearSegment>,
}

/// Ordered affine branches whose domains tile (0, 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseLinearMap {
    name: String,
    branches: Vec<Branch>,
    near: Option<NearTable>,
}

impl PiecewiseLinearMap {
    pub fn new(name: impl Into<String>, branches: Vec<Branch>) -> Result<Self, MapError> {
        let name = name.into();
        if branches.is_empty() {
            return Err(MapError::Invalid(format!("{name}: no branches")));
        }
        let mut expected = Dyadic::zero();
        for b in &branches {
            if b.domain.lo != expected {
                return Err(MapError::Invalid(format!(
                    "{name}: branch domains must tile (0,1) in order; gap or overlap at {expected}"
                )));
            }
            let img = b.image();
            if img.lo.is_negative() || img.hi > Dyadic::one() {
                return Err(MapError::Invalid(format!("{name}: branch image {img} leaves [0,1]")));
            }
            expected = b.domain.hi.clone();
        }
        if expected != Dyadic::one() {
            return Err(MapError::Invalid(format!("{name}: branches end at {expected}, not 1")));
        }
        let near = build_near_table(&branches);
        Ok(Self { name, branches, near })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Interior breakpoints, ascending.
    pub fn breakpoints(&self) -> Vec<Dyadic> {
        self.branches[1..].iter().map(|b| b.domain.lo.clone()).collect()
    }

    /// Index of the branch whose open domain contains `x`.
    pub fn branch_index(&self, x: &Dyadic) -> Result<usize, MapError> {
        if !Interval::unit().contains(x) {
            return Err(MapError::OutOfDomain(x.clone()));
        }
        let idx = self.branches.partition_point(|b| &b.domain.hi <= x);
        if idx >= self.branches.len() || !self.branches[idx].domain.contains(x) {
            return Err(MapError::BreakpointHit(x.clone()));
        }
        Ok(idx)
    }

    pub fn apply(&self, x: &Dyadic) -> Result<Dyadic, MapError> {
        let idx = self.branch_index(x)?;
        Ok(self.branches[idx].apply(x))
    }

    /// Rightward-resolving evaluation in `f64`, for plotting and diagnostics.
    pub fn apply_f64(&self, x: f64) -> f64 {
        let idx = self
            .branches
            .iter()
            .position(|b| x < b.domain.hi.to_f64())
            .unwrap_or(self.branches.len() - 1);
        let b = &self.branches[idx];
        b.slope.as_f64() * x + b.intercept.to_f64()
    }

    /// Near-coordinate tables, `None` if some constant is too wide for the
    /// fixed-window backend.
    pub fn near_table(&self) -> Option<&NearTable> {
        self.near.as_ref()
    }
}

fn build_near_table(branches: &[Branch]) -> Option<NearTable> {
    let half = Dyadic::pow2(-1);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, b) in branches.iter().enumerate() {
        if b.domain.lo < half {
            let upper = if b.domain.hi < half { Some(NearThreshold::from_dyadic(&b.domain.hi)?) } else { None };
            left.push(NearSegment { upper, branch: i, affine: b.near_affine(false)? });
        }
    }
    for (i, b) in branches.iter().enumerate().rev() {
        if b.domain.hi > half {
            let upper = if b.domain.lo > half {
                Some(NearThreshold::from_dyadic(&(&Dyadic::one() - &b.domain.lo))?)
            } else {
                None
            };
            right.push(NearSegment { upper, branch: i, affine: b.near_affine(true)? });
        }
    }
    Some(NearTable { left, right })
}

/// Which constituent map was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Tau1,
    Tau2,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Tau1 => "tau1",
            Symbol::Tau2 => "tau2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Hata,
    Pelikan,
    Mbgi,
    Custom,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Hata => "hata",
            SystemKind::Pelikan => "pelikan",
            SystemKind::Mbgi => "mbgi",
            SystemKind::Custom => "custom",
        })
    }
}

impl FromStr for SystemKind {
    type Err = MapError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hata" => Ok(SystemKind::Hata),
            "pelikan" => Ok(SystemKind::Pelikan),
            "mbgi" => Ok(SystemKind::Mbgi),
            _ => Err(MapError::UnknownSystem(s.to_string())),
        }
    }
}

/// Two maps drawn i.i.d. with probabilities `p` and `1 - p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomMapSystem {
    pub name: String,
    pub kind: SystemKind,
    pub tau1: PiecewiseLinearMap,
    pub tau2: PiecewiseLinearMap,
    pub p: Rational,
}

impl RandomMapSystem {
    pub fn new(
        name: impl Into<String>,
        kind: SystemKind,
        tau1: PiecewiseLinearMap,
        tau2: PiecewiseLinearMap,
        p: Rational,
    ) -> Result<Self, MapError> {
        if p <= rat(0, 1) || p >= rat(1, 1) {
            return Err(MapError::Invalid(format!("p = {p} must lie in (0,1)")));
        }
        Ok(Self { name: name.into(), kind, tau1, tau2, p })
    }

    pub fn map(&self, symbol: Symbol) -> &PiecewiseLinearMap {
        match symbol {
            Symbol::Tau1 => &self.tau1,
            Symbol::Tau2 => &self.tau2,
        }
    }

    pub fn prob(&self, symbol: Symbol) -> Rational {
        match symbol {
            Symbol::Tau1 => self.p.clone(),
            Symbol::Tau2 => rat(1, 1) - &self.p,
        }
    }

    pub fn apply(&self, symbol: Symbol, x: &Dyadic) -> Result<Dyadic, MapError> {
        self.map(symbol).apply(x)
    }

    pub fn to_table(&self) -> SystemTable {
        SystemTable {
            name: self.name.clone(),
            p: crate::numerics::rational_to_string(&self.p),
            tau1: self.tau1.branches.clone(),
            tau2: self.tau2.branches.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_table()).expect("branch tables always serialize")
    }

    /// Parse a branch table. The result is a custom system even if the
    /// branches coincide with a builtin one.
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let table: SystemTable = serde_json::from_str(text).map_err(|e| MapError::Table(e.to_string()))?;
        let p = crate::numerics::parse_rational(&table.p).map_err(|e| MapError::Table(e.to_string()))?;
        let tau1 = PiecewiseLinearMap::new(format!("{}.tau1", table.name), table.tau1)?;
        let tau2 = PiecewiseLinearMap::new(format!("{}.tau2", table.name), table.tau2)?;
        Self::new(table.name, SystemKind::Custom, tau1, tau2, p)
    }
}

/// Serialized form of a random map system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemTable {
    pub name: String,
    pub p: String,
    pub tau1: Vec<Branch>,
    pub tau2: Vec<Branch>,
}

fn d(s: &str) -> Dyadic {
    s.parse().expect("builtin constant")
}

fn br(lo: &str, hi: &str, slope: &str, intercept: &str) -> Branch {
    Branch::new(
        Interval::new(d(lo), d(hi)).expect("builtin interval"),
        slope.parse().expect("builtin slope"),
        d(intercept),
    )
}

fn plm(name: &str, branches: Vec<Branch>) -> PiecewiseLinearMap {
    PiecewiseLinearMap::new(name, branches).expect("builtin map")
}

pub fn hata() -> RandomMapSystem {
    let tau1 = plm("hata.tau1", vec![br("0", "1/2", "1/2", "0"), br("1/2", "1", "2", "-1")]);
    let tau2 = plm("hata.tau2", vec![br("0", "1/2", "2", "0"), br("1/2", "1", "1/2", "1/2")]);
    RandomMapSystem::new("hata", SystemKind::Hata, tau1, tau2, rat(1, 2)).expect("builtin system")
}

pub fn pelikan() -> RandomMapSystem {
    let tau1 = plm("pelikan.tau1", vec![br("0", "1/2", "2", "0"), br("1/2", "1", "2", "-1")]);
    let tau2 = plm("pelikan.tau2", vec![br("0", "1", "1/2", "0")]);
    RandomMapSystem::new("pelikan", SystemKind::Pelikan, tau1, tau2, rat(1, 2)).expect("builtin system")
}

pub fn mbgi() -> RandomMapSystem {
    let tau1 = plm(
        "mbgi.tau1",
        vec![
            br("0", "1/4", "2", "0"),
            br("1/4", "1/2", "-2", "1"),
            br("1/2", "3/4", "-2", "2"),
            br("3/4", "1", "2", "-1"),
        ],
    );
    let tau2 = plm("mbgi.tau2", vec![br("0", "1/2", "-1/4", "1"), br("1/2", "1", "-1/4", "1/4")]);
    RandomMapSystem::new("mbgi", SystemKind::Mbgi, tau1, tau2, rat(2, 3)).expect("builtin system")
}

/// One of the three builtin systems by name.
pub fn builtin(name: &str) -> Result<RandomMapSystem, MapError> {
    Ok(builtin_kind(name.parse()?))
}

pub fn builtin_kind(kind: SystemKind) -> RandomMapSystem {
    match kind {
        SystemKind::Hata => hata(),
        SystemKind::Pelikan => pelikan(),
        SystemKind::Mbgi => mbgi(),
        SystemKind::Custom => panic!("custom systems have no builtin table"),
    }
}
