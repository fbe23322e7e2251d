//! The acceptance suite: eleven numbered criteria, each with a pass/fail
//! outcome and a runtime budget.

use std::time::Instant;

use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};
use skewlaw_core::chain::{
    gf_identity_check_with, cn_series, pf_column_sums, set_measure_value, stationarity_residual,
    walk_hitting_pmf, wandering_rates, WalkType,
};
use skewlaw_core::maps::{builtin_kind, RandomMapSystem, Symbol, SystemKind};
use skewlaw_core::montecarlo::{
    default_set, empirical_transitions, itinerary, sample_initial_exact, simulate_ensemble_with, CoinSource,
    DensitySpec, Indicator, RngStream,
};
use skewlaw_core::numerics::{rat, rational_to_f64, Rational};
use skewlaw_core::partition::{CellTag, PartitionScheme};
use skewlaw_core::stats::{arcsine_cdf, halfnormal_cdf, ks_distance, scaled_halfnormal_cdf};

use crate::commands::{ensemble_options, Artifact};
use crate::config::{Command, RunConfig};
use crate::CliError;

pub const KINDS: [SystemKind; 3] = [SystemKind::Hata, SystemKind::Pelikan, SystemKind::Mbgi];

/// Criteria that fail for reasons analysed outside the code: the stated
/// target is not what the mathematics produces.
pub const KNOWN_DISCREPANCIES: &[(u8, &str)] = &[
    (
        6,
        "pelikan: with mu(I_k) = 2^-2 (2^(k+1)-1) 2^-(k+1) the junction I_0 has mass 1/8 and \
         w_N ~ (1/4) sqrt(2/pi) N^(1/2), so the ratio tends to 1/4, not 1",
    ),
    (
        9,
        "the occupation time of E normalized by sqrt(N) converges to (2 mu(E)/kappa) |N|, where \
         w_N ~ kappa sqrt(2/pi) N^(1/2); the scale mu(E)/sqrt(pi) is off by a constant factor \
         (see corrected_ks)",
    ),
];

pub fn known_discrepancy(id: u8) -> Option<&'static str> {
    KNOWN_DISCREPANCIES.iter().find(|(i, _)| *i == id).map(|(_, why)| *why)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    /// `metric_pass` and within budget.
    pub pass: bool,
    pub metric_pass: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    pub detail: String,
    pub known_discrepancy: Option<&'static str>,
    pub data: Value,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({:.2}s of {}s) {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed_s,
            self.budget_s,
            self.detail
        )
    }
}

/// One Monte Carlo law comparison.
#[derive(Debug, Clone, Serialize)]
pub struct LawRow {
    pub system: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub law: String,
    pub ks: f64,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
    /// Scale `c` of the `c |N|` law the samples are expected to follow.
    pub corrected_scale: Option<f64>,
    pub corrected_ks: Option<f64>,
}

struct Check {
    pass: bool,
    detail: String,
    data: Value,
    laws: Vec<LawRow>,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>, data: Value) -> Self {
        Check { pass, detail: detail.into(), data, laws: Vec::new() }
    }
}

const TITLES: [(&str, f64); 11] = [
    ("exact transition tables", 1.0),
    ("exact stationarity", 1.0),
    ("Perron-Frobenius stochasticity", 1.0),
    ("hitting-time oracle equivalence", 10.0),
    ("generating-function identity", 10.0),
    ("wandering-rate asymptotics", 30.0),
    ("conjugacy commutation", 30.0),
    ("arcsine law", 180.0),
    ("Darling-Kac law", 600.0),
    ("empirical transition frequencies", 60.0),
    ("thread-count determinism", 600.0),
];

/// Runs one `simulate` config with a thread count and returns the CSV bytes.
pub type Runner<'a> = dyn Fn(&RunConfig, Option<usize>) -> Result<Vec<u8>, CliError> + 'a;

pub fn in_process_runner(config: &RunConfig, threads: Option<usize>) -> Result<Vec<u8>, CliError> {
    let artifact = crate::commands::run(config, threads)?;
    Ok(artifact.csv.unwrap_or_default().into_bytes())
}

/// Run one criterion.
pub fn run_criterion(id: u8, seed: u64, threads: Option<usize>, runner: &Runner) -> Result<(CriterionOutcome, Vec<LawRow>), CliError> {
    let &(title, budget_s) = TITLES
        .get((id as usize).wrapping_sub(1))
        .ok_or_else(|| CliError::Usage(format!("no criterion {id}")))?;
    let start = Instant::now();
    let check = match id {
        1 => tables()?,
        2 => stationarity()?,
        3 => stochasticity()?,
        4 => hitting_times()?,
        5 => generating_function()?,
        6 => wandering()?,
        7 => conjugacy(seed)?,
        8 => arcsine(seed, threads)?,
        9 => darling_kac(seed, threads)?,
        10 => transitions(seed)?,
        11 => determinism(seed, runner)?,
        _ => return Err(CliError::Usage(format!("no criterion {id}"))),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let outcome = CriterionOutcome {
        id,
        title,
        pass: check.pass && elapsed_s <= budget_s,
        metric_pass: check.pass,
        elapsed_s,
        budget_s,
        detail: check.detail,
        known_discrepancy: known_discrepancy(id),
        data: check.data,
    };
    Ok((outcome, check.laws))
}

pub fn run_verify(config: &RunConfig, threads: Option<usize>, runner: &Runner) -> Result<Artifact, CliError> {
    let mut criteria = Vec::new();
    let mut laws = Vec::new();
    let mut messages = Vec::new();
    for id in (1..=11u8).filter(|&i| config.suite.includes(i)) {
        let (outcome, rows) = run_criterion(id, config.seed, threads, runner)?;
        messages.push(outcome.line());
        if let (false, Some(why)) = (outcome.pass, outcome.known_discrepancy) {
            messages.push(format!("             known discrepancy: {why}"));
        }
        criteria.push(outcome);
        laws.extend(rows);
    }
    let all_pass = criteria.iter().all(|c| c.pass);
    messages.push(format!("{} of {} criteria passed", criteria.iter().filter(|c| c.pass).count(), criteria.len()));
    let report = json!({ "config": config, "criteria": criteria, "laws": laws, "all_pass": all_pass });
    Ok(Artifact { config: config.clone(), csv: None, json: report, messages, passed: all_pass })
}

fn pow_half(j: u32) -> Rational {
    (0..j).fold(Rational::one(), |acc, _| acc * rat(1, 2))
}

/// The explicit q(s,t) tables of the three systems.
pub fn table_q(kind: SystemKind, s: CellTag, t: CellTag) -> Rational {
    use CellTag::*;
    match kind {
        SystemKind::Hata => match (s, t) {
            (Minus(k), Minus(j)) | (Plus(k), Plus(j)) if j == k + 1 || (k >= 1 && j + 1 == k) => rat(1, 2),
            (Minus(0), Plus(j)) | (Plus(0), Minus(j)) => pow_half(j + 2),
            _ => Rational::zero(),
        },
        SystemKind::Mbgi => match (s, t) {
            (Minus(k), Plus(j)) | (Plus(k), Minus(j)) if j == k + 2 => rat(1, 3),
            (Minus(k), Minus(j)) | (Plus(k), Plus(j)) if k >= 1 && j + 1 == k => rat(2, 3),
            (Minus(0), Minus(j)) | (Plus(0), Plus(j)) => rat(2, 3) * pow_half(j + 1),
            _ => Rational::zero(),
        },
        SystemKind::Pelikan => match (s, t) {
            (Single(0), Single(1)) => rat(1, 2) + pow_half(3),
            (Single(0), Single(j)) => pow_half(j + 2),
            (Single(k), Single(j)) if j == k + 1 || j + 1 == k => rat(1, 2),
            _ => Rational::zero(),
        },
        SystemKind::Custom => Rational::zero(),
    }
}

fn tables() -> Result<Check, CliError> {
    const K: u32 = 12;
    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for kind in KINDS {
        let system = builtin_kind(kind);
        let scheme = PartitionScheme::for_system(&system)?;
        let tags = scheme.tags(K);
        for &s in &tags {
            let row = scheme.transition_row(&system, s, K)?;
            for &t in &tags {
                let expect = table_q(kind, s, t);
                let direct = scheme.transition_prob(&system, s, t)?;
                compared += 1;
                if direct != expect || row.prob(t) != expect {
                    mismatches.push(format!("{kind} q({s},{t})"));
                }
            }
        }
    }
    let pass = mismatches.is_empty();
    let detail = format!("{compared} entries compared, {} mismatches", mismatches.len());
    Ok(Check::new(pass, detail, json!({ "compared": compared, "mismatches": mismatches })))
}

fn stationarity() -> Result<Check, CliError> {
    let mut nonzero = Vec::new();
    for kind in KINDS {
        for (t, r) in stationarity_residual(kind, 100)? {
            if !r.is_zero() {
                nonzero.push(format!("{kind} {t}"));
            }
        }
    }
    let detail = format!("indices <= 100, {} nonzero residuals", nonzero.len());
    Ok(Check::new(nonzero.is_empty(), detail, json!({ "nonzero": nonzero })))
}

fn stochasticity() -> Result<Check, CliError> {
    let mut off = Vec::new();
    for kind in KINDS {
        for (t, sum) in pf_column_sums(kind, 50)? {
            if !sum.is_one() {
                off.push(format!("{kind} {t}"));
            }
        }
    }
    let detail = format!("indices <= 50, {} column sums differ from 1", off.len());
    Ok(Check::new(off.is_empty(), detail, json!({ "off": off })))
}

/// `P(φ_{-k} = n)` for `1 ≤ k, n ≤ len` from all `2^len` step sequences; an
/// event decided by the first `n` steps collects the mass of every extension.
pub fn brute_force_hitting(walk: WalkType, len: u32) -> Vec<Vec<Rational>> {
    let (up, p_up, p_down) = match walk {
        WalkType::SymmetricSimple => (1i64, rat(1, 2), rat(1, 2)),
        WalkType::TwoOne => (2i64, rat(1, 3), rat(2, 3)),
    };
    let path_prob: Vec<Rational> = (0..=len)
        .map(|ups| {
            let mut p = Rational::one();
            for i in 0..len {
                p *= if i < ups { &p_up } else { &p_down };
            }
            p
        })
        .collect();
    let size = len as usize + 1;
    let mut table = vec![vec![Rational::zero(); size]; size];
    for path in 0u32..(1 << len) {
        let prob = &path_prob[path.count_ones() as usize];
        let mut pos = 0i64;
        let mut min = 0i64;
        for step in 1..=len {
            pos += if path >> (step - 1) & 1 == 1 { up } else { -1 };
            // Down steps have size one, so a new minimum is a first hit.
            if pos < min {
                min = pos;
                table[(-pos) as usize][step as usize] += prob;
            }
        }
    }
    table
}

fn hitting_times() -> Result<Check, CliError> {
    const LEN: u32 = 12;
    let mut mismatches = Vec::new();
    for walk in [WalkType::SymmetricSimple, WalkType::TwoOne] {
        let brute = brute_force_hitting(walk, LEN);
        for k in 1..=LEN {
            let pmf = walk_hitting_pmf(walk, k, LEN as usize)?;
            for (n, expected) in brute[k as usize].iter().enumerate().skip(1) {
                if pmf.get(n) != *expected {
                    mismatches.push(format!("{walk:?} k={k} n={n}"));
                }
            }
        }
    }
    let detail = format!("n, k <= {LEN}, both walks, {} mismatches", mismatches.len());
    Ok(Check::new(mismatches.is_empty(), detail, json!({ "mismatches": mismatches })))
}

fn generating_function() -> Result<Check, CliError> {
    let mut checks = Vec::new();
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for kind in KINDS {
        let series = cn_series(kind, 400)?;
        for z in [0.3, 0.5, 0.9] {
            let c = gf_identity_check_with(kind, z, &series)?;
            pass &= c.pass;
            worst = worst.max(c.discrepancy);
            checks.push(json!({ "system": kind, "z": z, "discrepancy": c.discrepancy, "tail_bound": c.tail_bound, "pass": c.pass }));
        }
    }
    Ok(Check::new(pass, format!("N = 400, z in {{0.3, 0.5, 0.9}}, max discrepancy {worst:.2e}"), json!(checks)))
}

fn wandering() -> Result<Check, CliError> {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let rates = wandering_rates(kind, &[100, 1_000, 10_000])?;
        let last = rates.last().expect("three rates").ratio;
        let in_band = (0.95..=1.05).contains(&last);
        let monotone = rates.windows(2).all(|w| (w[1].ratio - 1.0).abs() < (w[0].ratio - 1.0).abs());
        pass &= in_band && monotone;
        parts.push(format!("{kind} {last:.4}{}", if in_band && monotone { "" } else { " (out)" }));
        rows.push(json!({
            "system": kind,
            "ratios": rates.iter().map(|r| json!({ "N": r.n, "w_N": r.w_n, "ratio": r.ratio })).collect::<Vec<_>>(),
            "in_band": in_band,
            "monotone": monotone,
        }));
    }
    Ok(Check::new(pass, format!("ratio at N=1e4: {}", parts.join(", ")), json!(rows)))
}

fn conjugacy(seed: u64) -> Result<Check, CliError> {
    const POINTS: usize = 1000;
    const STEPS: usize = 200;
    let mut failures = Vec::new();
    let mut skipped = 0usize;
    for kind in KINDS {
        let system = builtin_kind(kind);
        let mut checked = 0;
        let mut id = 0u64;
        while checked < POINTS {
            let stream = RngStream::new(seed, id);
            id += 1;
            let x0 = sample_initial_exact(&mut stream.bits(), &DensitySpec::Uniform01);
            let mut coins = stream.coins(&system.p);
            let seq: Vec<Symbol> = (0..=STEPS).map(|_| coins.next_symbol()).collect();
            // Points that land on a breakpoint have no itinerary; draw another.
            let Ok(full) = itinerary(&system, &x0, &seq, STEPS + 1) else {
                skipped += 1;
                continue;
            };
            let x1 = system.apply(seq[0], &x0)?;
            let shifted = itinerary(&system, &x1, &seq[1..], STEPS)?;
            if full[1..] != shifted[..] {
                failures.push(format!("{kind} stream {}", id - 1));
            }
            checked += 1;
        }
    }
    let detail = format!("{POINTS} points x {STEPS} steps x 3 systems, {} failures", failures.len());
    Ok(Check::new(failures.is_empty(), detail, json!({ "failures": failures, "redrawn": skipped })))
}

fn ensemble(system: &RandomMapSystem, config: &RunConfig, threads: Option<usize>) -> Result<Vec<skewlaw_core::montecarlo::EnsembleSummary>, CliError> {
    Ok(simulate_ensemble_with(system, &ensemble_options(config, threads))?)
}

fn arcsine(seed: u64, threads: Option<usize>) -> Result<Check, CliError> {
    let mut config = RunConfig::new(Command::Simulate);
    config.steps = vec![1_000, 10_000, 100_000];
    config.trajectories = 5000;
    config.seed = seed;
    let system = builtin_kind(SystemKind::Hata);
    let summaries = ensemble(&system, &config, threads)?;
    let mut laws = Vec::new();
    let mut ks = Vec::new();
    for s in &summaries {
        let d = ks_distance(&s.sorted, |u| arcsine_cdf(u.clamp(0.0, 1.0)).expect("clamped"))
            .map_err(|e| CliError::Compute(e.to_string()))?;
        ks.push(d);
        let threshold = (s.n == 10_000).then_some(0.05);
        laws.push(LawRow {
            system: system.name.clone(),
            n: s.n,
            m: s.m,
            law: "arcsine".into(),
            ks: d,
            threshold,
            pass: threshold.map(|t| d <= t),
            corrected_scale: None,
            corrected_ks: None,
        });
    }
    let pass = ks[1] <= 0.05 && ks[2] < ks[0];
    let detail = format!("KS at N=1e3/1e4/1e5: {:.4} / {:.4} / {:.4}", ks[0], ks[1], ks[2]);
    let drops: u64 = summaries.iter().map(|s| s.precision_drops).max().unwrap_or(0);
    let mut check = Check::new(pass, detail, json!({ "ks": ks, "precision_drops": drops }));
    check.laws = laws;
    Ok(check)
}

/// Leading constant of `w_N / (√(2/π) N^{1/2})` for the default junction.
fn wandering_constant(kind: SystemKind) -> f64 {
    match kind {
        SystemKind::Pelikan => 0.25,
        _ => 1.0,
    }
}

/// The simulate config whose samples criteria 9 and 11 examine.
pub fn darling_kac_config(kind: SystemKind, seed: u64) -> RunConfig {
    let mut config = RunConfig::new(Command::Simulate);
    config.system = kind.to_string();
    config.steps = vec![1_000, 10_000, 100_000];
    config.trajectories = 2000;
    config.seed = seed;
    config.indicator = Indicator::InSet(default_set(kind).expect("builtin"));
    config
}

fn darling_kac(seed: u64, threads: Option<usize>) -> Result<Check, CliError> {
    let mut pass = true;
    let mut laws = Vec::new();
    let mut parts = Vec::new();
    let mut corrected = Vec::new();
    for kind in KINDS {
        let config = darling_kac_config(kind, seed);
        let system = builtin_kind(kind);
        let Indicator::InSet(set) = &config.indicator else { unreachable!() };
        let mu_e = set_measure_value(kind, set)?;
        let scale = 2.0 * mu_e / wandering_constant(kind);
        let summaries = ensemble(&system, &config, threads)?;
        let mut ks = Vec::new();
        let mut last_corrected = f64::NAN;
        for s in &summaries {
            let d = ks_distance(&s.sorted, |x| scaled_halfnormal_cdf(x, mu_e).expect("x >= 0"))
                .map_err(|e| CliError::Compute(e.to_string()))?;
            let dc = ks_distance(&s.sorted, |x| halfnormal_cdf(x, scale).expect("x >= 0"))
                .map_err(|e| CliError::Compute(e.to_string()))?;
            ks.push(d);
            last_corrected = dc;
            let threshold = (s.n == 100_000).then_some(0.10);
            laws.push(LawRow {
                system: system.name.clone(),
                n: s.n,
                m: s.m,
                law: format!("scaled-half-normal(mu(E)={mu_e:.6})"),
                ks: d,
                threshold,
                pass: threshold.map(|t| d <= t),
                corrected_scale: Some(scale),
                corrected_ks: Some(dc),
            });
        }
        let ok = ks[1] < ks[0] && ks[2] < ks[1] && ks[2] <= 0.10;
        pass &= ok;
        parts.push(format!("{kind} {:.3}/{:.3}/{:.3}", ks[0], ks[1], ks[2]));
        corrected.push(format!("{kind} {last_corrected:.3}"));
    }
    let detail = format!(
        "KS at N=1e3/1e4/1e5: {}; KS against the corrected scale at N=1e5: {}",
        parts.join(", "),
        corrected.join(", ")
    );
    let mut check = Check::new(pass, detail, json!({}));
    check.laws = laws;
    Ok(check)
}

fn transitions(seed: u64) -> Result<Check, CliError> {
    const N: usize = 1_000_000;
    const MIN_VISITS: u64 = 400;
    let system = builtin_kind(SystemKind::Hata);
    let scheme = PartitionScheme::for_system(&system)?;
    let counts = empirical_transitions(&system, N, seed)?;
    let mut worst_ratio: f64 = 0.0;
    let mut violations = Vec::new();
    let mut rows_checked = 0;
    for (&s, &visits) in counts.rows.iter().filter(|(_, &v)| v >= MIN_VISITS) {
        rows_checked += 1;
        let bound = 4.0 / (visits as f64).sqrt();
        let deepest = counts.row(s).iter().map(|(t, _)| t.index()).max().unwrap_or(0);
        let k = deepest.max(s.index()) + 8;
        let row = scheme.transition_row(&system, s, k)?;
        let mut targets: Vec<CellTag> = row.support_upto(k).into_iter().map(|(t, _)| t).collect();
        targets.extend(counts.row(s).into_iter().map(|(t, _)| t));
        targets.sort();
        targets.dedup();
        for t in targets {
            let freq = counts.count(s, t) as f64 / visits as f64;
            let dev = (freq - rational_to_f64(&row.prob(t))).abs();
            worst_ratio = worst_ratio.max(dev / bound);
            if dev > bound {
                violations.push(format!("{s}->{t}: {dev:.4} > {bound:.4}"));
            }
        }
    }
    let detail = format!(
        "{rows_checked} rows with >= {MIN_VISITS} visits, worst deviation {:.2} of the bound",
        worst_ratio
    );
    Ok(Check::new(violations.is_empty(), detail, json!({ "rows": rows_checked, "violations": violations })))
}

fn determinism(seed: u64, runner: &Runner) -> Result<Check, CliError> {
    let mut same = Vec::new();
    for kind in KINDS {
        let config = darling_kac_config(kind, seed);
        let one = runner(&config, Some(1))?;
        let four = runner(&config, Some(4))?;
        same.push(json!({ "system": kind, "bytes": one.len(), "identical": one == four }));
    }
    let pass = same.iter().all(|v| v["identical"] == json!(true));
    let detail = format!("criterion 9 samples with 1 vs 4 threads: {}", if pass { "byte-identical" } else { "DIFFER" });
    Ok(Check::new(pass, detail, json!(same)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use skewlaw_core::chain::hitting_prob_closed_form;

    #[test]
    fn brute_force_agrees_with_ballot_formula() {
        for walk in [WalkType::SymmetricSimple, WalkType::TwoOne] {
            let table = brute_force_hitting(walk, 8);
            for k in 1..=8u32 {
                for n in 1..=8u32 {
                    assert_eq!(table[k as usize][n as usize], hitting_prob_closed_form(walk, k, n as u64));
                }
            }
        }
    }

    #[test]
    fn tables_cover_whole_rows() {
        // Row sums of the explicit tables, with the infinite families summed.
        let s: Rational = (0..200).map(|j| table_q(SystemKind::Hata, CellTag::Minus(0), CellTag::Plus(j))).sum();
        assert_eq!(s + rat(1, 2) + pow_half(201), Rational::one());
        assert_eq!(table_q(SystemKind::Pelikan, CellTag::Single(0), CellTag::Single(1)), rat(5, 8));
        assert_eq!(table_q(SystemKind::Hata, CellTag::Minus(0), CellTag::Plus(1)), rat(1, 8));
    }

    #[test]
    fn exact_criteria_pass() {
        for id in [1, 2, 3, 4] {
            let (outcome, _) = run_criterion(id, 1, None, &in_process_runner).unwrap();
            assert!(outcome.metric_pass, "{}", outcome.line());
        }
    }

    #[test]
    fn discrepancies_are_documented() {
        assert!(known_discrepancy(6).is_some() && known_discrepancy(9).is_some());
        assert!(known_discrepancy(1).is_none());
    }

    #[test]
    fn unknown_criterion_is_usage_error() {
        assert!(matches!(run_criterion(12, 1, None, &in_process_runner), Err(CliError::Usage(_))));
    }

    #[test]
    fn corrected_scales() {
        let scale = |kind| 2.0 * set_measure_value(kind, &default_set(kind).unwrap()).unwrap() / wandering_constant(kind);
        assert!((scale(SystemKind::Hata) - 1.0).abs() < 1e-15);
        assert!((scale(SystemKind::Pelikan) - 1.0).abs() < 1e-15);
        assert!((scale(SystemKind::Mbgi) - 3.0 * 2f64.sqrt() / 4.0).abs() < 1e-15);
    }
}
