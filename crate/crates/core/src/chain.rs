//! Invariant masses, stationarity, Perron–Frobenius coefficients, hitting
//! times of the embedded walks, and wandering rates.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::maps::{builtin_kind, SystemKind};
use crate::numerics::{rat, rational_to_f64, Rational, ScaleConstant};
use crate::partition::{CellTag, PartitionError, PartitionScheme, TransitionRow};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("custom systems have no closed-form chain")]
    Custom,
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("invariant mass of {0} is zero or undefined")]
    ZeroMass(CellTag),
    #[error("fixed-point iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("argument out of range: {0}")]
    Domain(String),
}

/// Increments of the embedded walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum WalkType {
    /// `±1` with probability 1/2 each.
    SymmetricSimple,
    /// `+2` with probability 1/3, `-1` with probability 2/3.
    TwoOne,
}

impl WalkType {
    pub fn up_step(&self) -> i64 {
        match self {
            WalkType::SymmetricSimple => 1,
            WalkType::TwoOne => 2,
        }
    }

    /// Integer weights `(up, down)` over the common denominator.
    pub fn weights(&self) -> (u32, u32, u32) {
        match self {
            WalkType::SymmetricSimple => (1, 1, 2),
            WalkType::TwoOne => (1, 2, 3),
        }
    }

    pub fn drift(&self) -> Rational {
        let (u, d, den) = self.weights();
        rat(self.up_step() * u as i64 - d as i64, den as i64)
    }
}

/// Closed-form data of one builtin chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainSpec {
    pub kind: SystemKind,
    pub walk: WalkType,
    /// Masses are rational cofactors of this constant.
    pub scale: ScaleConstant,
    pub note: String,
}

pub fn chain_spec(kind: SystemKind) -> Result<ChainSpec, ChainError> {
    let (walk, scale, note) = match kind {
        SystemKind::Hata => (WalkType::SymmetricSimple, ScaleConstant::one(), "up to a constant multiple"),
        SystemKind::Pelikan => (WalkType::SymmetricSimple, ScaleConstant::one(), "up to a constant multiple"),
        SystemKind::Mbgi => (
            WalkType::TwoOne,
            ScaleConstant { rational: rat(3, 8), sqrt2: true },
            "up to a constant multiple; masses are cofactors of 3√2/8",
        ),
        SystemKind::Custom => return Err(ChainError::Custom),
    };
    Ok(ChainSpec { kind, walk, scale, note: note.to_string() })
}

fn pow2_rat(j: i64) -> Rational {
    if j >= 0 {
        Rational::from_integer(BigInt::one() << j as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-j) as usize)
    }
}

/// Rational cofactor of `μ(tag)`.
pub fn invariant_mass(kind: SystemKind, tag: CellTag) -> Result<Rational, ChainError> {
    let scheme = PartitionScheme::for_kind(kind)?;
    scheme.cell_interval(tag)?;
    let k = match tag {
        CellTag::Refined(..) => return Err(ChainError::Partition(PartitionError::InvalidTag(tag))),
        other => other.index() as i64,
    };
    Ok(match kind {
        SystemKind::Hata => (pow2_rat(k + 1) - rat(1, 1)) * pow2_rat(-k - 2),
        SystemKind::Pelikan => pow2_rat(-2) * (pow2_rat(k + 1) - rat(1, 1)) * pow2_rat(-k - 1),
        SystemKind::Mbgi => {
            let sign = if k % 2 == 0 { rat(1, 3) } else { rat(-1, 3) };
            (rat(8, 3) * pow2_rat(k) + sign - rat(1, 1)) * pow2_rat(-k - 2)
        }
        SystemKind::Custom => return Err(ChainError::Custom),
    })
}

/// Masses of every cell with index at most `k_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantMass {
    pub kind: SystemKind,
    pub masses: Vec<(CellTag, Rational)>,
    pub scale: ScaleConstant,
    pub note: String,
}

pub fn invariant_masses(kind: SystemKind, k_max: u32) -> Result<InvariantMass, ChainError> {
    let spec = chain_spec(kind)?;
    let scheme = PartitionScheme::for_kind(kind)?;
    let masses = scheme
        .tags(k_max)
        .into_iter()
        .map(|t| invariant_mass(kind, t).map(|m| (t, m)))
        .collect::<Result<_, _>>()?;
    Ok(InvariantMass { kind, masses, scale: spec.scale, note: spec.note })
}

/// Rows of every cell that can reach a cell of index `≤ k_max` in one step.
///
/// Slopes have modulus at most 2 and deep cells are mapped next to an
/// endpoint, so a cell of index `j ≥ 1` only reaches indices `≥ j - 2`.
fn incoming_rows(kind: SystemKind, k_max: u32) -> Result<(PartitionScheme, Vec<TransitionRow>), ChainError> {
    let scheme = PartitionScheme::for_kind(kind)?;
    let system = builtin_kind(kind);
    let rows = scheme
        .tags(k_max + 2)
        .into_iter()
        .map(|s| scheme.transition_row(&system, s, k_max + 2))
        .collect::<Result<_, _>>()?;
    Ok((scheme, rows))
}

/// `ρ(t) - Σ_s ρ(s) q(s,t)` for every cell with index at most `k_max`.
pub fn stationarity_residual(kind: SystemKind, k_max: u32) -> Result<Vec<(CellTag, Rational)>, ChainError> {
    let (scheme, rows) = incoming_rows(kind, k_max)?;
    let masses: Vec<Rational> =
        rows.iter().map(|r| invariant_mass(kind, r.from)).collect::<Result<_, _>>()?;
    scheme
        .tags(k_max)
        .into_iter()
        .map(|t| {
            let inflow: Rational = rows.iter().zip(&masses).map(|(row, m)| m * row.prob(t)).sum();
            Ok((t, invariant_mass(kind, t)? - inflow))
        })
        .collect()
}

/// `c_μ(s,t) = μ(s) q(s,t) / μ(t)`.
pub fn pf_coefficient(kind: SystemKind, s: CellTag, t: CellTag) -> Result<Rational, ChainError> {
    let mt = invariant_mass(kind, t)?;
    if mt.is_zero() {
        return Err(ChainError::ZeroMass(t));
    }
    let scheme = PartitionScheme::for_kind(kind)?;
    let q = scheme.transition_prob(&builtin_kind(kind), s, t)?;
    Ok(invariant_mass(kind, s)? * q / mt)
}

/// `Σ_s c_μ(s,t)` for every cell with index at most `k_max`.
pub fn pf_column_sums(kind: SystemKind, k_max: u32) -> Result<Vec<(CellTag, Rational)>, ChainError> {
    let (scheme, rows) = incoming_rows(kind, k_max)?;
    let masses: Vec<Rational> =
        rows.iter().map(|r| invariant_mass(kind, r.from)).collect::<Result<_, _>>()?;
    scheme
        .tags(k_max)
        .into_iter()
        .map(|t| {
            let mt = invariant_mass(kind, t)?;
            let sum: Rational = rows.iter().zip(&masses).map(|(row, m)| m * row.prob(t) / &mt).sum();
            Ok((t, sum))
        })
        .collect()
}

/// Cofactor of `μ(E)` for a finite union of disjoint intervals, using that
/// `μ` has constant density on every cell.
pub fn set_measure(kind: SystemKind, set: &[crate::maps::Interval]) -> Result<Rational, ChainError> {
    use crate::numerics::Dyadic;
    let scheme = PartitionScheme::for_kind(kind)?;
    let two_sided = scheme.sidedness == crate::partition::Sidedness::TwoSided;
    let mut total = Rational::zero();
    for i in set {
        let near_min = if two_sided { (&i.lo).min(&(&Dyadic::one() - &i.hi)).clone() } else { i.lo.clone() };
        if !near_min.is_positive() {
            return Err(ChainError::Domain(format!("{i} has infinite measure")));
        }
        let mut k = 0u32;
        loop {
            let tags: Vec<CellTag> =
                if two_sided { vec![CellTag::Minus(k), CellTag::Plus(k)] } else { vec![CellTag::Single(k)] };
            let mut any_deep = false;
            for t in tags {
                let cell = scheme.cell_interval(t)?;
                if let Some(cut) = cell.intersect(i) {
                    total += invariant_mass(kind, t)? * cut.length().to_rational() / cell.length().to_rational();
                }
                let cell_near_hi = if cell.lo >= Dyadic::pow2(-1) { &Dyadic::one() - &cell.lo } else { cell.hi.clone() };
                any_deep |= cell_near_hi > near_min;
            }
            if !any_deep {
                break;
            }
            k += 1;
        }
    }
    Ok(total)
}

/// `μ(E)` including the scale constant.
pub fn set_measure_value(kind: SystemKind, set: &[crate::maps::Interval]) -> Result<f64, ChainError> {
    Ok(rational_to_f64(&set_measure(kind, set)?) * chain_spec(kind)?.scale.value())
}

/// `n ↦ P(φ_{-k} = n)` for `1 ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HittingPmf {
    pub walk: WalkType,
    pub k: u32,
    probs: Vec<Rational>,
}

impl HittingPmf {
    pub fn n_max(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, n: usize) -> Rational {
        if n == 0 || n > self.probs.len() {
            return Rational::zero();
        }
        self.probs[n - 1].clone()
    }

    pub fn partial_sum(&self) -> Rational {
        self.probs.iter().cloned().sum()
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }
}

/// First-passage distribution to `-k` by dynamic programming over the
/// positions above the absorbing level.
pub fn walk_hitting_pmf(walk: WalkType, k: u32, n_max: usize) -> Result<HittingPmf, ChainError> {
    if k == 0 || n_max == 0 {
        return Err(ChainError::Domain("need k ≥ 1 and n_max ≥ 1".into()));
    }
    let (wu, wd, den) = walk.weights();
    let up = walk.up_step() as usize;
    let k = k as usize;
    // Index i stands for position i + 1 - k, so 0 is the level just above -k.
    let mut dist: Vec<BigUint> = vec![BigUint::zero(); k];
    dist[k - 1] = BigUint::one();
    let mut probs = Vec::with_capacity(n_max);
    let mut denom = BigUint::one();
    for n in 1..=n_max {
        denom *= den;
        let remaining = n_max - n;
        let mut next: Vec<BigUint> = vec![BigUint::zero(); dist.len() + up];
        let mut hit = BigUint::zero();
        for (i, w) in dist.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            next[i + up] += w * wu;
            if i == 0 {
                hit += w * wd;
            } else {
                next[i - 1] += w * wd;
            }
        }
        // Positions more than `remaining` above the level can no longer hit in time.
        next.truncate(remaining + 1);
        while next.last().is_some_and(|w| w.is_zero()) && next.len() > 1 {
            next.pop();
        }
        dist = next;
        probs.push(Rational::new(BigInt::from(hit), BigInt::from(denom.clone())));
    }
    Ok(HittingPmf { walk, k: k as u32, probs })
}

fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `P(W_n = x)`.
pub fn walk_position_prob(walk: WalkType, n: u64, x: i64) -> Rational {
    let (wu, wd, den) = walk.weights();
    let a = walk.up_step();
    // u ups and d downs: u + d = n, a u - d = x.
    let num = x + n as i64;
    if num < 0 || num % (a + 1) != 0 {
        return Rational::zero();
    }
    let u = (num / (a + 1)) as u64;
    if u > n {
        return Rational::zero();
    }
    let d = n - u;
    let count = binomial(n, u) * BigUint::from(wu).pow(u as u32) * BigUint::from(wd).pow(d as u32);
    Rational::new(BigInt::from(count), BigInt::from(BigUint::from(den).pow(n as u32)))
}

/// `P(φ_{-k} = n) = (k/n) P(W_n = -k)` for downward skip-free walks.
pub fn hitting_prob_closed_form(walk: WalkType, k: u32, n: u64) -> Rational {
    if k == 0 || n == 0 {
        return Rational::zero();
    }
    rat(k as i64, n as i64) * walk_position_prob(walk, n, -(k as i64))
}

/// `E z^{φ_{-k}}`.
pub fn walk_hitting_gf(walk: WalkType, k: u32, z: f64) -> Result<f64, ChainError> {
    if !(z > 0.0 && z < 1.0) {
        return Err(ChainError::Domain(format!("z = {z} must lie in (0,1)")));
    }
    let g = match walk {
        WalkType::SymmetricSimple => (1.0 - (1.0 - z * z).sqrt()) / z,
        WalkType::TwoOne => two_one_root(z)?,
    };
    Ok(g.powi(k as i32))
}

/// Smallest positive root of `g = (z/3) g^3 + 2z/3`.
fn two_one_root(z: f64) -> Result<f64, ChainError> {
    const MAX_ITER: usize = 10_000;
    let mut g = 0.0f64;
    for _ in 0..MAX_ITER {
        let next = z / 3.0 * g * g * g + 2.0 * z / 3.0;
        if (next - g).abs() <= 1e-14 {
            // Newton polish; the iterate already sits in the basin of the smallest root.
            let mut r = next;
            for _ in 0..2 {
                let f = z / 3.0 * r * r * r + 2.0 * z / 3.0 - r;
                let df = z * r * r - 1.0;
                r -= f / df;
            }
            return Ok(r);
        }
        g = next;
    }
    Err(ChainError::NoConvergence(MAX_ITER))
}

/// Weight `b_k` of `P(φ_{-k} = n)` in `c_n`.
pub fn cn_weight(kind: SystemKind, k: u32) -> Result<Rational, ChainError> {
    let k = k as i64;
    match kind {
        SystemKind::Hata | SystemKind::Pelikan => Ok(rat(2, 1) - pow2_rat(-k)),
        SystemKind::Mbgi => {
            let alt = if k % 2 == 0 { pow2_rat(-k) } else { -pow2_rat(-k) };
            Ok(rat(8, 3) + alt / rat(3, 1) - pow2_rat(-k))
        }
        SystemKind::Custom => Err(ChainError::Custom),
    }
}

fn cn_weight_f64(kind: SystemKind, k: u32) -> f64 {
    let h = 0.5f64.powi(k as i32);
    match kind {
        SystemKind::Mbgi => {
            let alt = if k.is_multiple_of(2) { h } else { -h };
            8.0 / 3.0 + alt / 3.0 - h
        }
        _ => 2.0 - h,
    }
}

/// `c_1, …, c_{n_max}` exactly (mBGI: rational part, constant 3√2/16 omitted).
pub fn cn_series(kind: SystemKind, n_max: usize) -> Result<Vec<Rational>, ChainError> {
    let walk = chain_spec(kind)?.walk;
    let (wu, wd, den) = walk.weights();
    let up = walk.up_step() as usize;
    let weights: Vec<Rational> = (1..=n_max as u32).map(|k| cn_weight(kind, k)).collect::<Result<_, _>>()?;
    // Forward counts of W_n; index i is position i - n_max.
    let width = n_max * (up + 1) + 1;
    let mut dist = vec![BigUint::zero(); width];
    dist[n_max] = BigUint::one();
    let mut denom = BigUint::one();
    let mut out = Vec::with_capacity(n_max);
    let (mut lo, mut hi) = (n_max, n_max);
    for n in 1..=n_max {
        let mut next = vec![BigUint::zero(); width];
        for i in lo..=hi {
            let w = &dist[i];
            if w.is_zero() {
                continue;
            }
            next[i + up] += w * wu;
            next[i - 1] += w * wd;
        }
        lo -= 1;
        hi += up;
        dist = next;
        denom *= den;
        let denom_int = BigInt::from(denom.clone());
        let mut c = Rational::zero();
        for k in 1..=n {
            let count = &dist[n_max - k];
            if count.is_zero() {
                continue;
            }
            let p = Rational::new(BigInt::from(count.clone()) * BigInt::from(k), &denom_int * BigInt::from(n));
            c += &weights[k - 1] * p;
        }
        out.push(c);
    }
    Ok(out)
}

/// `c_n` for one `n ≥ 1`.
pub fn cn(kind: SystemKind, n: usize) -> Result<Rational, ChainError> {
    if n == 0 {
        return Err(ChainError::Domain("c_n is defined for n ≥ 1".into()));
    }
    Ok(cn_series(kind, n)?.pop().expect("n ≥ 1"))
}

/// `c_1, …, c_{n_max}` in floating point by a forward probability recursion.
pub fn cn_series_f64(kind: SystemKind, n_max: usize) -> Result<Vec<f64>, ChainError> {
    let walk = chain_spec(kind)?.walk;
    let (wu, wd, den) = walk.weights();
    let (pu, pd) = (wu as f64 / den as f64, wd as f64 / den as f64);
    let up = walk.up_step() as usize;
    let weights: Vec<f64> = (1..=n_max as u32).map(|k| cn_weight_f64(kind, k)).collect();
    let width = n_max * (up + 1) + 1;
    let mut dist = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    dist[n_max] = 1.0;
    let (mut lo, mut hi) = (n_max, n_max);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        next[lo - 1..=hi + up].iter_mut().for_each(|v| *v = 0.0);
        for i in lo..=hi {
            let w = dist[i];
            next[i + up] += w * pu;
            next[i - 1] += w * pd;
        }
        lo -= 1;
        hi += up;
        std::mem::swap(&mut dist, &mut next);
        let c: f64 = (1..=n).map(|k| weights[k - 1] * (k as f64 / n as f64) * dist[n_max - k]).sum();
        out.push(c);
    }
    Ok(out)
}

/// Cofactor of `μ(J)` for the junction set and of each `μ(J ∩ {φ_J = n+1})`
/// relative to `c_n`.
///
/// Hata: `J = I⁻_0 ∪ I⁺_0`, mass 1/2, excursion mass `c_n / 2`.
/// Pelikan: `J = I_0`, mass 1/8, excursion mass `c_n / 8`.
/// mBGI: `J = I⁻_0 ∪ I⁺_0`, cofactor 1, excursion cofactor `c_n / 2`.
pub fn junction_constants(kind: SystemKind) -> Result<(Rational, Rational), ChainError> {
    match kind {
        SystemKind::Hata => Ok((rat(1, 2), rat(1, 2))),
        SystemKind::Pelikan => Ok((rat(1, 8), rat(1, 8))),
        SystemKind::Mbgi => Ok((rat(1, 1), rat(1, 2))),
        SystemKind::Custom => Err(ChainError::Custom),
    }
}

/// `μ̃(J̃_n)` as a cofactor of the system's scale constant.
pub fn excursion_mass(kind: SystemKind, n: usize) -> Result<Rational, ChainError> {
    let (_, factor) = junction_constants(kind)?;
    Ok(factor * cn(kind, n)?)
}

/// Exact `w_N` cofactor: `μ(J) + Σ_{n=1}^{N-1} μ̃(J̃_n)`.
pub fn wandering_rate_exact(kind: SystemKind, big_n: usize) -> Result<Rational, ChainError> {
    if big_n < 1 {
        return Err(ChainError::Domain("N must be at least 1".into()));
    }
    let (mj, factor) = junction_constants(kind)?;
    let sum: Rational = cn_series(kind, big_n - 1)?.into_iter().sum();
    Ok(mj + factor * sum)
}

/// Wandering rate against its predicted growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WanderingRate {
    pub n: usize,
    pub w_n: f64,
    pub asymptote: f64,
    pub ratio: f64,
}

/// `w_N` (including the scale constant) and its ratio to `√(2/π) N^{1/2}`.
pub fn wandering_rate(kind: SystemKind, big_n: usize) -> Result<WanderingRate, ChainError> {
    Ok(wandering_rates(kind, &[big_n])?.remove(0))
}

/// [`wandering_rate`] for several `N`, sharing one coefficient series.
pub fn wandering_rates(kind: SystemKind, ns: &[usize]) -> Result<Vec<WanderingRate>, ChainError> {
    if ns.iter().any(|&n| n < 2) {
        return Err(ChainError::Domain("N must be at least 2".into()));
    }
    let spec = chain_spec(kind)?;
    let (mj, factor) = junction_constants(kind)?;
    let n_top = ns.iter().copied().max().unwrap_or(2);
    let series = cn_series_f64(kind, n_top - 1)?;
    let mut prefix = Vec::with_capacity(series.len() + 1);
    let mut acc = 0.0f64;
    prefix.push(0.0);
    for c in &series {
        acc += c;
        prefix.push(acc);
    }
    let scale = spec.scale.value();
    let (mj, factor) = (rational_to_f64(&mj), rational_to_f64(&factor));
    Ok(ns
        .iter()
        .map(|&n| {
            let w_n = scale * (mj + factor * prefix[n - 1]);
            let asymptote = (2.0 / std::f64::consts::PI).sqrt() * (n as f64).sqrt();
            WanderingRate { n, w_n, asymptote, ratio: w_n / asymptote }
        })
        .collect())
}

/// Outcome of comparing a truncated coefficient series with its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GfCheck {
    pub z: f64,
    pub n: usize,
    pub partial: f64,
    pub closed_form: f64,
    pub discrepancy: f64,
    pub tail_bound: f64,
    pub pass: bool,
}

/// Rounding allowance for the floating evaluation of both sides.
pub const GF_FLOAT_ALLOWANCE: f64 = 1e-12;

/// `Σ_{k≥1} b_k g^k` with `g = E z^{φ_{-1}}`.
pub fn cn_generating_function(kind: SystemKind, z: f64) -> Result<f64, ChainError> {
    let spec = chain_spec(kind)?;
    let g = walk_hitting_gf(spec.walk, 1, z)?;
    Ok(match kind {
        SystemKind::Mbgi => 8.0 / 3.0 * g / (1.0 - g) + (-g / 2.0) / (1.0 + g / 2.0) / 3.0 - (g / 2.0) / (1.0 - g / 2.0),
        _ => {
            let w = 1.0 - g;
            2.0 * (1.0 - w) / w - (1.0 - w) / (1.0 + w)
        }
    })
}

/// `|Σ_{n≤N} c_n z^n - closed form|` against `B z^{N+1} / (1 - z)`, where
/// `B` bounds every `b_k`.
pub fn gf_identity_check(kind: SystemKind, z: f64, big_n: usize) -> Result<GfCheck, ChainError> {
    let series = cn_series(kind, big_n)?;
    gf_identity_check_with(kind, z, &series)
}

/// [`gf_identity_check`] with a precomputed exact series.
pub fn gf_identity_check_with(kind: SystemKind, z: f64, series: &[Rational]) -> Result<GfCheck, ChainError> {
    let closed_form = cn_generating_function(kind, z)?;
    let mut partial = 0.0f64;
    let mut zn = 1.0f64;
    for c in series {
        zn *= z;
        partial += rational_to_f64(c) * zn;
    }
    let bound = match kind {
        SystemKind::Mbgi => 8.0 / 3.0,
        _ => 2.0,
    };
    let n = series.len();
    let tail_bound = bound * z.powi(n as i32 + 1) / (1.0 - z);
    let discrepancy = (partial - closed_form).abs();
    Ok(GfCheck { z, n, partial, closed_form, discrepancy, tail_bound, pass: discrepancy <= tail_bound + GF_FLOAT_ALLOWANCE })
}

/// `P(φ_{-k} = n)` as `f64`, for diagnostics.
pub fn rational_prob_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_examples() {
        assert_eq!(invariant_mass(SystemKind::Hata, CellTag::Minus(0)).unwrap(), rat(1, 4));
        assert_eq!(invariant_mass(SystemKind::Hata, CellTag::Plus(1)).unwrap(), rat(3, 8));
        assert_eq!(invariant_mass(SystemKind::Pelikan, CellTag::Single(1)).unwrap(), rat(3, 16));
        assert_eq!(invariant_mass(SystemKind::Mbgi, CellTag::Minus(2)).unwrap(), rat(5, 8));
        assert!(matches!(invariant_mass(SystemKind::Custom, CellTag::Minus(0)), Err(ChainError::Custom | ChainError::Partition(_))));
        assert!(invariant_mass(SystemKind::Hata, CellTag::Single(0)).is_err());
    }

    #[test]
    fn deep_cells_move_at_most_two_levels() {
        for kind in [SystemKind::Hata, SystemKind::Pelikan, SystemKind::Mbgi] {
            let scheme = PartitionScheme::for_kind(kind).unwrap();
            let sys = builtin_kind(kind);
            for s in scheme.tags(40).into_iter().filter(|s| s.index() >= 1) {
                let row = scheme.transition_row(&sys, s, 60).unwrap();
                assert!(row.tails.iter().all(|t| t.first + 2 >= s.index()));
                assert!(row.entries.iter().all(|(t, _)| t.index() + 2 >= s.index()), "{kind} {s}");
            }
        }
    }

    #[test]
    fn residuals_vanish() {
        for kind in [SystemKind::Hata, SystemKind::Pelikan, SystemKind::Mbgi] {
            for (t, r) in stationarity_residual(kind, 12).unwrap() {
                assert!(r.is_zero(), "{kind} {t}: {r}");
            }
        }
    }

    #[test]
    fn set_measures() {
        use crate::maps::Interval;
        let iv = |a: &str, b: &str| Interval::new(a.parse().unwrap(), b.parse().unwrap()).unwrap();
        assert_eq!(set_measure(SystemKind::Hata, &[iv("1/4", "3/4")]).unwrap(), rat(1, 2));
        assert_eq!(set_measure(SystemKind::Pelikan, &[iv("1/2", "1")]).unwrap(), rat(1, 8));
        assert_eq!(set_measure(SystemKind::Mbgi, &[iv("1/4", "3/4")]).unwrap(), rat(1, 1));
        // Half of I⁻_1 plus all of I⁻_2 for Hata: 3/16 + 7/16.
        assert_eq!(set_measure(SystemKind::Hata, &[iv("1/16", "3/16")]).unwrap(), rat(3, 16) + rat(7, 16));
        assert!(set_measure(SystemKind::Hata, &[iv("0", "1/4")]).is_err());
        assert!(set_measure(SystemKind::Hata, &[iv("3/4", "1")]).is_err());
        assert!(set_measure(SystemKind::Pelikan, &[iv("3/4", "1")]).is_ok());
        let v = set_measure_value(SystemKind::Mbgi, &[iv("1/4", "3/4")]).unwrap();
        assert!((v - 3.0 * 2f64.sqrt() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn pf_examples() {
        assert_eq!(pf_coefficient(SystemKind::Hata, CellTag::Minus(0), CellTag::Minus(1)).unwrap(), rat(1, 3));
        assert_eq!(pf_coefficient(SystemKind::Hata, CellTag::Minus(5), CellTag::Minus(1)).unwrap(), rat(0, 1));
        for (t, s) in pf_column_sums(SystemKind::Mbgi, 8).unwrap() {
            assert_eq!(s, rat(1, 1), "{t}");
        }
    }

    #[test]
    fn hitting_examples() {
        let pmf = walk_hitting_pmf(WalkType::SymmetricSimple, 1, 5).unwrap();
        assert_eq!(pmf.get(1), rat(1, 2));
        assert_eq!(pmf.get(2), rat(0, 1));
        assert_eq!(pmf.get(3), rat(1, 8));
        let pmf = walk_hitting_pmf(WalkType::TwoOne, 1, 4).unwrap();
        assert_eq!(pmf.get(1), rat(2, 3));
        for walk in [WalkType::SymmetricSimple, WalkType::TwoOne] {
            for k in 1..5 {
                let pmf = walk_hitting_pmf(walk, k, 20).unwrap();
                for n in 1..=20u64 {
                    assert_eq!(pmf.get(n as usize), hitting_prob_closed_form(walk, k, n), "{walk:?} k={k} n={n}");
                }
            }
        }
        assert_eq!(WalkType::TwoOne.drift(), rat(0, 1));
        assert_eq!(WalkType::SymmetricSimple.drift(), rat(0, 1));
    }

    #[test]
    fn gf_examples() {
        let g = walk_hitting_gf(WalkType::SymmetricSimple, 1, 0.5).unwrap();
        assert!((g - (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!((walk_hitting_gf(WalkType::SymmetricSimple, 3, 0.999_999).unwrap() - 1.0).abs() < 0.01);
        let pmf = walk_hitting_pmf(WalkType::TwoOne, 1, 80).unwrap();
        let partial: f64 = (1..=80).map(|n| rational_prob_f64(&pmf.get(n)) * 0.5f64.powi(n as i32)).sum();
        let g = walk_hitting_gf(WalkType::TwoOne, 1, 0.5).unwrap();
        assert!((partial - g).abs() <= 0.5f64.powi(80) / 0.5 + 1e-15);
        assert!(walk_hitting_gf(WalkType::TwoOne, 1, 1.0).is_err());
    }

    #[test]
    fn cn_examples() {
        assert_eq!(cn(SystemKind::Hata, 1).unwrap(), rat(3, 4));
        assert_eq!(cn(SystemKind::Hata, 2).unwrap(), rat(7, 16));
        assert_eq!(cn(SystemKind::Hata, 3).unwrap(), rat(3, 16) + rat(15, 64));
        let exact = cn_series(SystemKind::Mbgi, 40).unwrap();
        let float = cn_series_f64(SystemKind::Mbgi, 40).unwrap();
        for (e, f) in exact.iter().zip(&float) {
            assert!((rational_to_f64(e) - f).abs() < 1e-13);
        }
    }

    #[test]
    fn gf_identity() {
        for kind in [SystemKind::Hata, SystemKind::Mbgi] {
            let check = gf_identity_check(kind, 0.5, 60).unwrap();
            assert!(check.pass, "{check:?}");
        }
    }

    #[test]
    fn wandering_ratios() {
        let h = wandering_rates(SystemKind::Hata, &[100, 1000, 10_000]).unwrap();
        assert!((h[2].ratio - 1.0).abs() < 0.05);
        assert!((h[0].ratio - 1.0).abs() > (h[1].ratio - 1.0).abs());
        let exact = wandering_rate_exact(SystemKind::Hata, 50).unwrap();
        let float = wandering_rate(SystemKind::Hata, 50).unwrap();
        assert!((rational_to_f64(&exact) - float.w_n).abs() < 1e-12);
    }
}
