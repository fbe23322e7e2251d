//! Transition kernels against hand-transcribed tables, plus λ-image relations.

use num_traits::{One, Zero};
use skewlaw_core::maps::{hata, mbgi, pelikan, Interval, RandomMapSystem, Symbol, SystemKind};
use skewlaw_core::numerics::{rat, Rational};
use skewlaw_core::partition::{CellTag, PartitionScheme};

const MAX_INDEX: u32 = 12;

fn half_pow(j: u32) -> Rational {
    Rational::new(1.into(), num_bigint::BigInt::from(1) << j)
}

fn hata_table(s: CellTag, t: CellTag) -> Rational {
    use CellTag::*;
    match (s, t) {
        (Minus(k), Minus(j)) | (Plus(k), Plus(j)) if j == k + 1 => rat(1, 2),
        (Minus(k), Minus(j)) | (Plus(k), Plus(j)) if k >= 1 && j + 1 == k => rat(1, 2),
        (Minus(0), Plus(j)) | (Plus(0), Minus(j)) => half_pow(j + 2),
        _ => Rational::zero(),
    }
}

fn mbgi_table(s: CellTag, t: CellTag) -> Rational {
    use CellTag::*;
    match (s, t) {
        (Minus(k), Plus(j)) | (Plus(k), Minus(j)) if j == k + 2 => rat(1, 3),
        (Minus(k), Minus(j)) | (Plus(k), Plus(j)) if k >= 1 && j + 1 == k => rat(2, 3),
        (Minus(0), Minus(j)) | (Plus(0), Plus(j)) => rat(2, 3) * half_pow(j + 1),
        _ => Rational::zero(),
    }
}

fn pelikan_table(s: CellTag, t: CellTag) -> Rational {
    use CellTag::*;
    match (s, t) {
        (Single(0), Single(1)) => rat(1, 2) + half_pow(3),
        (Single(0), Single(j)) => half_pow(j + 2),
        (Single(k), Single(j)) if j == k + 1 || j + 1 == k => rat(1, 2),
        _ => Rational::zero(),
    }
}

/// Fraction of `s` that the given branch carries into `t`, read off the
/// Pelikan maps: τ1 halves the index (I_0 spreads over the whole interval),
/// τ2 deepens it by one.
fn pelikan_fraction(chi: Symbol, s: u32, t: u32) -> Rational {
    match chi {
        Symbol::Tau1 if s == 0 => half_pow(t + 1),
        Symbol::Tau1 if t + 1 == s => Rational::one(),
        Symbol::Tau2 if t == s + 1 => Rational::one(),
        _ => Rational::zero(),
    }
}

fn oracle(kind: SystemKind) -> fn(CellTag, CellTag) -> Rational {
    match kind {
        SystemKind::Hata => hata_table,
        SystemKind::Mbgi => mbgi_table,
        SystemKind::Pelikan => pelikan_table,
        SystemKind::Custom => unreachable!(),
    }
}

fn systems() -> [RandomMapSystem; 3] {
    [hata(), pelikan(), mbgi()]
}

#[test]
fn transition_probabilities_match_tables() {
    for sys in systems() {
        let scheme = PartitionScheme::for_system(&sys).unwrap();
        let table = oracle(sys.kind);
        let tags = scheme.tags(MAX_INDEX);
        for &s in &tags {
            for &t in &tags {
                let q = scheme.transition_prob(&sys, s, t).unwrap();
                assert_eq!(q, table(s, t), "{} q({s},{t})", sys.name);
            }
        }
    }
}

#[test]
fn transition_rows_match_tables() {
    for sys in systems() {
        let scheme = PartitionScheme::for_system(&sys).unwrap();
        let table = oracle(sys.kind);
        for s in scheme.tags(MAX_INDEX) {
            let row = scheme.transition_row(&sys, s, MAX_INDEX).unwrap();
            // Deep targets land in the tails, so compare every index a row can reach.
            for t in scheme.tags(MAX_INDEX + 40) {
                assert_eq!(row.prob(t), table(s, t), "{} row {s} at {t}", sys.name);
            }
        }
    }
}

#[test]
fn rows_are_stochastic() {
    for sys in systems() {
        let scheme = PartitionScheme::for_system(&sys).unwrap();
        for s in scheme.tags(50) {
            let row = scheme.transition_row(&sys, s, 50).unwrap();
            assert_eq!(row.total(), Rational::one(), "{} row {s}", sys.name);
        }
    }
}

#[test]
fn refined_pelikan_kernel() {
    let sys = pelikan();
    let scheme = PartitionScheme::for_system(&sys).unwrap();
    let symbols = [Symbol::Tau1, Symbol::Tau2];
    for s in 0..=MAX_INDEX {
        for t in 0..=MAX_INDEX {
            for chi1 in symbols {
                let expect = rat(1, 2) * pelikan_fraction(chi1, s, t);
                let a = scheme.refined_transition(&sys, CellTag::Refined(s, chi1), CellTag::Refined(t, Symbol::Tau1)).unwrap();
                let b = scheme.refined_transition(&sys, CellTag::Refined(s, chi1), CellTag::Refined(t, Symbol::Tau2)).unwrap();
                assert_eq!(a, expect, "refined ({s},{chi1}) -> ({t},tau1)");
                assert_eq!(a, b, "target symbol must not matter");
            }
            let marginal = scheme
                .refined_transition(&sys, CellTag::Refined(s, Symbol::Tau1), CellTag::Refined(t, Symbol::Tau1))
                .unwrap()
                + scheme
                    .refined_transition(&sys, CellTag::Refined(s, Symbol::Tau2), CellTag::Refined(t, Symbol::Tau1))
                    .unwrap();
            assert_eq!(marginal, pelikan_table(CellTag::Single(s), CellTag::Single(t)), "marginal ({s},{t})");
        }
    }
}

#[test]
fn refined_transition_rejects_other_systems() {
    let sys = hata();
    let scheme = PartitionScheme::for_system(&sys).unwrap();
    let s = CellTag::Refined(0, Symbol::Tau1);
    assert!(scheme.refined_transition(&sys, s, s).is_err());
}

fn image(sys: &RandomMapSystem, symbol: Symbol, cell: &Interval) -> Interval {
    let map = sys.map(symbol);
    let mid = (&cell.lo + &cell.hi).mul_pow2(-1);
    let branch = &map.branches()[map.branch_index(&mid).unwrap()];
    assert!(cell.is_subset_of(&branch.domain));
    let (a, b) = (branch.apply(&cell.lo), branch.apply(&cell.hi));
    if a < b {
        Interval::new(a, b).unwrap()
    } else {
        Interval::new(b, a).unwrap()
    }
}

#[test]
fn lambda_image_relations() {
    use CellTag::*;
    type Case = (RandomMapSystem, Symbol, fn(u32) -> CellTag, fn(u32) -> CellTag);
    let cases: [Case; 3] = [
        (hata(), Symbol::Tau1, Minus, |k| Minus(k + 1)),
        (pelikan(), Symbol::Tau2, Single, |k| Single(k + 1)),
        (mbgi(), Symbol::Tau2, Minus, |k| Plus(k + 2)),
    ];
    for (sys, symbol, from, to) in cases {
        let scheme = PartitionScheme::for_system(&sys).unwrap();
        for k in 0..=30 {
            let src = scheme.cell_interval(from(k)).unwrap();
            let dst = scheme.cell_interval(to(k)).unwrap();
            assert_eq!(image(&sys, symbol, &src), dst, "{} {symbol} {}", sys.name, from(k));
        }
    }
    // The mirror relations on the other side.
    let sys = hata();
    let scheme = PartitionScheme::for_system(&sys).unwrap();
    for k in 0..=30 {
        let src = scheme.cell_interval(Plus(k)).unwrap();
        assert_eq!(image(&sys, Symbol::Tau2, &src), scheme.cell_interval(Plus(k + 1)).unwrap());
    }
}
